import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from configuration import Configuration, WindowedConfiguration, periodize, random_shift, wrap_into
from energy import EnergyModel
from errors import DegenerateNormalizationError, DiagnosticsPreconditionError, EmptySampleSetError, MarginViolationError
from geometry import Box, Coordinates, DilatedRegion
from localenergy import check_environment, split, tail_bound
from logger import logger
from rng import derive_seed, spawn_generator
from sampler import SampleSet, poisson_sample
from testfunctions import LocalFunction

MIN_EXPECTED_PER_BIN = 5.0


@dataclass(frozen=True)
class IntensityReport:
    estimate: float
    std_error: float
    bound: float
    satisfied: bool


@dataclass(frozen=True)
class PartitionReport:
    lower: float
    upper: float
    estimate: float
    std_error: float
    draws: int


@dataclass(frozen=True)
class DlrReport:
    test_function: str
    delta: str
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    residual: float
    z_score: float
    outer_samples: int
    inner_draws: int


def batch_means_std_error(values: np.ndarray) -> float:
    """Standard error of the mean from √N nonoverlapping batches, robust to chain autocorrelation."""
    values = np.asarray(values, dtype=float)
    size = len(values)

    if size < 2:
        return 0.0

    batches = max(2, int(math.isqrt(size)))
    if size < 2 * batches:
        return float(np.std(values, ddof=1) / math.sqrt(size))

    batch_size = size // batches
    means = values[: batches * batch_size].reshape(batches, batch_size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(batches))


def require_samples(s: SampleSet, minimum: int = 2) -> None:
    if len(s.configs) < minimum:
        raise EmptySampleSetError(f"Need at least {minimum} sampled configurations, got {len(s.configs)}")


def estimate_intensity(s: SampleSet, subwindow: Optional[Box] = None) -> IntensityReport:
    """Mean points per unit volume, checked against the a priori bound ζe + H(∅) up to three standard errors."""
    require_samples(s)

    region = s.window if subwindow is None else subwindow
    if not region.within(s.window):
        raise DiagnosticsPreconditionError(f"Subwindow {region} must lie inside the sampling window {s.window}")

    volume = region.volume()
    counts = s.counts(region).astype(float)

    estimate = float(np.mean(counts) / volume)
    std_error = batch_means_std_error(counts) / volume

    m = s.spec.model
    bound = m.zeta * math.e + m.energy(np.zeros((0, m.dim)))

    return IntensityReport(estimate, std_error, bound, estimate <= bound + 3 * std_error)


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def partition_bounds(m: EnergyModel,
                     delta: Box,
                     w_outside: Configuration,
                     xi_cap: float = 0.0,
                     draws: int = 2000,
                     rng: Optional[np.random.Generator] = None) -> PartitionReport:
    """
    Sandwiches Z_Δ(ω) = E_{π_Δ}[exp(-H_Δ(·ω))] for a fixed exterior ω between
    e^{-Leb(Δ)} and exp(-A|ω_{Δ0\\Δ}| + H(ω_{Δ0\\Δ}) + Leb(Δ)(e^{C0-A} - 1)),
    and estimates it by Monte Carlo over unit Poisson draws in Δ.
    """
    outer = w_outside.points
    if np.any(delta.contains(outer)):
        raise ValueError(f"Exterior configuration must not have points inside {delta}")

    if draws < 1:
        raise ValueError(f"Number of draws must be positive, got {draws}")

    check_environment(m, outer)

    ring = outer[DilatedRegion(delta, m.shell_offset0).contains(outer)]
    ring_energy = m.energy(ring)

    furthest = float(np.max(delta.distance(outer))) if len(outer) > 0 else 0.0
    l_cover = max(0, math.ceil(furthest - m.shell_offset0))
    c0 = tail_bound(m, outer, delta, 0, l_cover, xi_cap)

    volume = delta.volume()
    lower = math.exp(-volume)
    upper = safe_exp(-m.stability_A * len(ring) + ring_energy + volume * (safe_exp(c0 - m.stability_A) - 1.0))

    rng = rng if rng is not None else spawn_generator(0)
    weights = np.array([math.exp(-m.local_energy(poisson_sample(delta, 1.0, rng).points, outer)) for _ in range(draws)])

    report = PartitionReport(lower, upper, float(np.mean(weights)), float(np.std(weights, ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0, draws)
    logger.flush("partition_bounds", report)

    return report


def check_margin(m: EnergyModel, s: SampleSet, delta: Box, functions: Sequence[LocalFunction]) -> None:
    margin = m.shell_offset0 + max((f.neighborhood for f in functions), default=0.0)
    if not delta.within(s.window, margin):
        raise MarginViolationError(f"{delta} dilated by {margin:g} must lie inside the sampling window {s.window}")


def self_normalized_ratio(log_weights: np.ndarray, values: np.ndarray, eps: float) -> np.ndarray:
    """
    Jackknife-corrected Σ w f / Σ w for every column of values.
    The normalization estimate mean(w) must stay above eps.
    """
    peak = float(np.max(log_weights))
    if peak == -math.inf or peak + math.log(np.mean(np.exp(log_weights - peak))) < math.log(eps):
        raise DegenerateNormalizationError(f"Inner normalization fell below {eps:g}")

    weights = np.exp(log_weights - peak)
    # one reduction for Σ w and every Σ w f so that a constant f gives a ratio of exactly 1
    sums = np.sum(weights[:, None] * np.column_stack([np.ones(len(weights)), values]), axis=0)
    total, weighted = sums[0], sums[1:]
    ratio = weighted / total

    draws = len(weights)
    remainder = total - weights
    if draws < 2 or np.any(remainder <= 0):
        return ratio

    leave_one_out = (weighted[None, :] - weights[:, None] * values) / remainder[:, None]
    return draws * ratio - (draws - 1) * leave_one_out.mean(axis=0)


def inner_expectations(m: EnergyModel,
                       config: Configuration,
                       delta: Box,
                       functions: Sequence[LocalFunction],
                       inner_draws: int,
                       eps: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Returns f(ω) and the estimate of E_{γ_Δ(·|ω)}[f] for every function."""
    _, outer = split(config.points, delta)
    check_environment(m, outer)

    log_weights = np.empty(inner_draws)
    values = np.empty((inner_draws, len(functions)))

    for k in range(inner_draws):
        inner = poisson_sample(delta, 1.0, rng).points
        log_weights[k] = -m.local_energy(inner, outer)

        joined = np.concatenate([inner, outer])
        values[k] = [f(joined) for f in functions]

    observed = np.array([f(config.points) for f in functions])
    return observed, self_normalized_ratio(log_weights, values, eps)


def z_score(residual: float, std_error: float) -> float:
    if std_error > 0:
        return residual / std_error

    return 0.0 if residual == 0 else math.copysign(math.inf, residual)


def dlr_residuals(m: EnergyModel,
                  s: SampleSet,
                  delta: Box,
                  functions: Sequence[LocalFunction],
                  inner_draws: int = 200,
                  eps: float = 1e-300,
                  seed: int = 0,
                  threads: int = 1) -> list[DlrReport]:
    """Checks E[f] = E[E_{γ_Δ}[f]] for several functions of one delta, sharing the inner draws."""
    require_samples(s)
    check_margin(m, s, delta, functions)

    if inner_draws < 1:
        raise ValueError(f"Number of inner draws must be positive, got {inner_draws}")

    def evaluate(index: int) -> tuple[np.ndarray, np.ndarray]:
        return inner_expectations(m, s.configs[index], delta, functions, inner_draws, eps, spawn_generator(seed, index))

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(evaluate, range(len(s.configs))))

    observed = np.array([result[0] for result in results])
    expected = np.array([result[1] for result in results])

    reports = []
    for j, f in enumerate(functions):
        lhs = float(np.mean(observed[:, j]))
        rhs = float(np.mean(expected[:, j]))
        residual = lhs - rhs

        reports.append(DlrReport(
            f.name,
            f"{delta.lower}..{delta.upper}",
            lhs,
            batch_means_std_error(observed[:, j]),
            rhs,
            batch_means_std_error(expected[:, j]),
            residual,
            z_score(residual, batch_means_std_error(observed[:, j] - expected[:, j])),
            len(s.configs),
            inner_draws,
        ))

    return reports


def dlr_residual(m: EnergyModel,
                 s: SampleSet,
                 delta: Box,
                 f: LocalFunction,
                 inner_draws: int = 200,
                 eps: float = 1e-300,
                 seed: int = 0,
                 threads: int = 1) -> DlrReport:
    return dlr_residuals(m, s, delta, [f], inner_draws, eps, seed, threads)[0]


def dlr_battery(m: EnergyModel,
                s: SampleSet,
                battery: Sequence[tuple[Box, LocalFunction]],
                inner_draws: int = 200,
                eps: float = 1e-300,
                seed: int = 0,
                threads: int = 1) -> list[DlrReport]:
    deltas: list[Box] = []
    groups: dict[Box, list[LocalFunction]] = {}
    for delta, f in battery:
        if delta not in groups:
            deltas.append(delta)
            groups[delta] = []
        groups[delta].append(f)

    reports = []
    for index, delta in enumerate(deltas):
        group = dlr_residuals(m, s, delta, groups[delta], inner_draws, eps, derive_seed(seed, index), threads)
        for report in group:
            logger.print(f"{report.test_function} on {report.delta}: residual {report.residual:.4g}, z {report.z_score:.3f}")
        reports.extend(group)

    logger.flush("dlr_battery", {"checks": len(reports), "max_abs_z": max((abs(r.z_score) for r in reports), default=0.0)})
    return reports


def stationarize_samples(s: SampleSet, copies: int, rng: np.random.Generator, shift_window: Optional[Union[Box, Coordinates]] = None) -> SampleSet:
    """Periodizes every sample over Λ_{(2k+1)n}, shifts it uniformly and wraps it back onto that torus."""
    shift = s.window if shift_window is None else shift_window

    configs = []
    window = s.window
    for config in s.configs:
        tiled = periodize(WindowedConfiguration(config, s.window), copies)
        window = tiled.window
        configs.append(wrap_into(random_shift(tiled.config, shift, rng), window))

    if len(s.configs) == 0:
        window = periodize(WindowedConfiguration(Configuration.empty(s.window.dim), s.window), copies).window

    return SampleSet(configs, replace(s.spec, window=window), s.acceptance, s.ess, s.attempts)


def count_histogram(s: SampleSet, subwindow: Optional[Box] = None, reference_intensity: Optional[float] = None) -> pd.DataFrame:
    """Empirical count distribution in the subwindow next to the Poisson reference with mean ζ·Leb."""
    require_samples(s, 1)

    region = s.window if subwindow is None else subwindow
    counts = s.counts(region)
    intensity = s.spec.model.zeta if reference_intensity is None else reference_intensity

    values, frequencies = np.unique(counts, return_counts=True)
    return pd.DataFrame({
        "count": values,
        "frequency": frequencies,
        "probability": frequencies / len(counts),
        "poisson": stats.poisson.pmf(values, intensity * region.volume()),
    })


def poisson_bins(counts: np.ndarray, mean: float) -> tuple[np.ndarray, np.ndarray]:
    """Observed and expected Poisson(mean) bin frequencies, edge bins merged until each expects at least 5."""
    counts = np.asarray(counts, dtype=int)
    size = len(counts)
    if size == 0:
        raise EmptySampleSetError("Chi-square test needs at least one count")

    if not mean > 0:
        raise ValueError(f"Poisson mean must be positive, got {mean}")

    top = int(max(np.max(counts), stats.poisson.ppf(1 - 1e-12, mean)))
    observed = [float(np.sum(counts == k)) for k in range(top)] + [float(np.sum(counts >= top))]
    expected = [size * float(stats.poisson.pmf(k, mean)) for k in range(top)] + [size * float(stats.poisson.sf(top - 1, mean))]

    while len(expected) > 1 and expected[0] < MIN_EXPECTED_PER_BIN:
        head = expected.pop(0)
        expected[0] += head
        head = observed.pop(0)
        observed[0] += head

    while len(expected) > 1 and expected[-1] < MIN_EXPECTED_PER_BIN:
        tail = expected.pop()
        expected[-1] += tail
        tail = observed.pop()
        observed[-1] += tail

    return np.array(observed), np.array(expected) * (size / sum(expected))


def poisson_chi_square(counts: np.ndarray, mean: float) -> tuple[float, float, int]:
    """Pearson goodness of fit of counts to Poisson(mean) over the merged bins of poisson_bins."""
    observed, expected = poisson_bins(counts, mean)
    if len(expected) < 2:
        return 0.0, 1.0, 0

    statistic, p_value = stats.chisquare(observed, expected)

    return float(statistic), float(p_value), len(expected) - 1


def reports_frame(reports: Sequence[object]) -> pd.DataFrame:
    return pd.DataFrame([asdict(report) for report in reports])
