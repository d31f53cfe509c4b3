import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from configuration import Configuration, read_configuration, uniform_in_box, write_configuration
from energy import EnergyModel, model_summary
from errors import RejectionExhaustedError, SamplerSpecError
from geometry import Box
from logger import logger
from manifest import read_manifest, write_manifest
from rng import spawn_generator

METHODS = ("rejection", "mcmc")
MOVES = ("birth", "death", "move")

DEFAULT_PROPOSAL_MIX = (0.4, 0.4, 0.2)
DEFAULT_BURN_IN = 10
DEFAULT_THINNING = 1


@dataclass(frozen=True)
class SamplerSpec:
    """
    Sampling plan for P_Λ on `window`. MCMC counts are in sweeps, one sweep being
    `sweep_size` = ceil(e^-A · Leb(window)) single proposals. Every chain retains
    (mcmc_sweeps - burn_in) // thinning configurations; rejection draws `samples`
    configurations in total across its streams.
    """

    model: EnergyModel
    window: Box
    method: str
    seed: int
    mcmc_sweeps: int = 0
    burn_in: int = 0
    thinning: int = 1
    proposal_mix: tuple[float, float, float] = DEFAULT_PROPOSAL_MIX
    samples: int = 0
    max_attempts: int = 100_000
    chains: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "proposal_mix", tuple(float(p) for p in self.proposal_mix))

        if self.method not in METHODS:
            raise SamplerSpecError(f"Unknown sampling method '{self.method}', expected one of {', '.join(METHODS)}")

        if self.window.dim != self.model.dim:
            raise SamplerSpecError(f"Window dimension {self.window.dim} does not match model dimension {self.model.dim}")

        if not 0 <= self.seed < 2 ** 64:
            raise SamplerSpecError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")

        if len(self.proposal_mix) != 3 or any(p < 0 for p in self.proposal_mix) or abs(sum(self.proposal_mix) - 1) > 1e-9:
            raise SamplerSpecError(f"Birth, death and move probabilities must be nonnegative and sum to 1, got {self.proposal_mix}")

        if self.chains < 1:
            raise SamplerSpecError(f"Number of chains must be positive, got {self.chains}")

        if self.method == "mcmc":
            if self.proposal_mix[0] == 0 or self.proposal_mix[1] == 0:
                raise SamplerSpecError("Birth and death probabilities must both be positive")

            if not self.mcmc_sweeps > self.burn_in >= 0:
                raise SamplerSpecError(f"Sweeps must exceed burn-in, got sweeps={self.mcmc_sweeps} burn_in={self.burn_in}")

            if self.thinning < 1:
                raise SamplerSpecError(f"Thinning must be positive, got {self.thinning}")
        else:
            if self.samples < 1:
                raise SamplerSpecError(f"Rejection sampling needs a positive sample count, got {self.samples}")

            if self.max_attempts < 1:
                raise SamplerSpecError(f"Maximum attempts must be positive, got {self.max_attempts}")

    @classmethod
    def with_defaults(cls, model: EnergyModel, window: Box, method: str, seed: int, samples: int, **overrides: Any) -> "SamplerSpec":
        """A spec retaining `samples` configurations per chain (mcmc) or in total (rejection)."""
        if method == "mcmc":
            burn_in = overrides.pop("burn_in", DEFAULT_BURN_IN)
            thinning = overrides.pop("thinning", DEFAULT_THINNING)
            sweeps = overrides.pop("mcmc_sweeps", burn_in + samples * thinning)

            return cls(model, window, method, seed, mcmc_sweeps=sweeps, burn_in=burn_in, thinning=thinning, **overrides)

        return cls(model, window, method, seed, samples=samples, **overrides)

    @property
    def sweep_size(self) -> int:
        return max(1, math.ceil(self.model.zeta * self.window.volume()))

    @property
    def retained_per_chain(self) -> int:
        return (self.mcmc_sweeps - self.burn_in) // self.thinning

    def summary(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "window": {"lower": self.window.lower, "upper": self.window.upper},
            "mcmc_sweeps": self.mcmc_sweeps,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "proposal_mix": self.proposal_mix,
            "samples": self.samples,
            "max_attempts": self.max_attempts,
            "chains": self.chains,
            "sweep_size": self.sweep_size,
        }


@dataclass
class SampleSet:
    configs: list[Configuration]
    spec: SamplerSpec
    acceptance: dict[str, float] = field(default_factory=dict)
    ess: float = 0.0
    attempts: int = 0

    def __post_init__(self) -> None:
        for config in self.configs:
            if not np.all(self.spec.window.contains(config.points)):
                raise ValueError(f"Sampled configuration leaves the window {self.spec.window}")

    @property
    def window(self) -> Box:
        return self.spec.window

    def counts(self, subwindow: Optional[Box] = None) -> np.ndarray:
        if subwindow is None:
            return np.array([len(config) for config in self.configs])

        return np.array([int(np.sum(subwindow.contains(config.points))) for config in self.configs])


def poisson_sample(window: Box, zeta: float, rng: np.random.Generator) -> Configuration:
    if not zeta >= 0:
        raise ValueError(f"Poisson intensity must be nonnegative, got {zeta}")

    count = rng.poisson(zeta * window.volume())
    return Configuration(uniform_in_box(window, count, rng), window.dim)


def rejection_draw(m: EnergyModel, window: Box, rng: np.random.Generator, max_attempts: int) -> tuple[Configuration, int]:
    if max_attempts < 1:
        raise ValueError(f"Maximum attempts must be positive, got {max_attempts}")

    for attempt in range(1, max_attempts + 1):
        proposal = poisson_sample(window, m.zeta, rng)

        # H(ω) - A|ω| ≥ 0 by stability, so the acceptance probability is at most 1
        excess = m.energy(proposal.points) - m.stability_A * len(proposal)
        if rng.random() < math.exp(-excess):
            return proposal, attempt

    raise RejectionExhaustedError(max_attempts)


def gibbs_rejection_sample(m: EnergyModel, window: Box, rng: np.random.Generator, max_attempts: int) -> Configuration:
    """Exact draw from P_Λ: Poisson(e^-A) proposals accepted with probability exp(-(H - A|ω|))."""
    config, _ = rejection_draw(m, window, rng, max_attempts)
    return config


def log_birth_ratio(m: EnergyModel, points: np.ndarray, x: np.ndarray, window: Box, proposal_mix: tuple[float, float, float]) -> float:
    h = m.local_energy(x.reshape(1, -1), points)
    if h == math.inf:
        return -math.inf

    birth, death, _ = proposal_mix
    return math.log(death / birth) + math.log(window.volume()) - math.log(len(points) + 1) - h


def log_death_ratio(m: EnergyModel, points: np.ndarray, i: int, window: Box, proposal_mix: tuple[float, float, float]) -> float:
    rest = np.delete(points, i, axis=0)
    h = m.local_energy(points[i].reshape(1, -1), rest)

    birth, death, _ = proposal_mix
    return math.log(birth / death) + math.log(len(points)) - math.log(window.volume()) + h


def log_move_ratio(m: EnergyModel, points: np.ndarray, i: int, x: np.ndarray) -> float:
    rest = np.delete(points, i, axis=0)
    h_new = m.local_energy(x.reshape(1, -1), rest)
    if h_new == math.inf:
        return -math.inf

    return m.local_energy(points[i].reshape(1, -1), rest) - h_new


class BirthDeathMoveChain:
    """Metropolis-Hastings chain with birth, death and uniform relocation proposals, started empty."""

    def __init__(self, spec: SamplerSpec, rng: np.random.Generator) -> None:
        self.spec = spec
        self.model = spec.model
        self.window = spec.window
        self.rng = rng

        self.points = np.zeros((0, spec.window.dim))
        self.thresholds = np.cumsum(spec.proposal_mix)

        self.proposed = {move: 0 for move in MOVES}
        self.accepted = {move: 0 for move in MOVES}

    def accept(self, log_ratio: float) -> bool:
        return log_ratio >= 0 or math.log(self.rng.random()) < log_ratio

    def step(self) -> None:
        u = self.rng.random()
        move = MOVES[min(int(np.searchsorted(self.thresholds, u, side="right")), len(MOVES) - 1)]
        self.proposed[move] += 1

        n = len(self.points)
        mix = self.spec.proposal_mix

        if move == "birth":
            x = uniform_in_box(self.window, 1, self.rng)[0]
            if self.accept(log_birth_ratio(self.model, self.points, x, self.window, mix)):
                self.points = np.vstack([self.points, x])
                self.accepted[move] += 1
        elif n > 0:
            i = int(self.rng.integers(n))

            if move == "death":
                if self.accept(log_death_ratio(self.model, self.points, i, self.window, mix)):
                    self.points = np.delete(self.points, i, axis=0)
                    self.accepted[move] += 1
            else:
                x = uniform_in_box(self.window, 1, self.rng)[0]
                if self.accept(log_move_ratio(self.model, self.points, i, x)):
                    self.points = self.points.copy()
                    self.points[i] = x
                    self.accepted[move] += 1

    def run(self) -> list[Configuration]:
        retained = []

        for sweep in range(1, self.spec.mcmc_sweeps + 1):
            for _ in range(self.spec.sweep_size):
                self.step()

            if sweep > self.spec.burn_in and (sweep - self.spec.burn_in) % self.spec.thinning == 0:
                retained.append(Configuration(self.points.copy(), self.window.dim))

        return retained


def autocorrelation_time(series: np.ndarray, max_lag: int = 50) -> float:
    n = len(series)
    if n < 10:
        return 1.0

    max_lag = min(max_lag, n // 4)
    mean, var = series.mean(), series.var()
    if var < 1e-12:
        return 1.0

    tau = 1.0
    for k in range(1, max_lag):
        rho = np.mean((series[:-k] - mean) * (series[k:] - mean)) / var
        if rho < 0.05:
            break

        tau += 2 * rho

    return max(1.0, tau)


def effective_sample_size(chains: list[list[Configuration]]) -> float:
    total = 0.0
    for configs in chains:
        counts = np.array([len(config) for config in configs], dtype=float)
        total += len(counts) / autocorrelation_time(counts)

    return total


def run_chain(spec: SamplerSpec, index: int) -> tuple[list[Configuration], dict[str, int], dict[str, int]]:
    chain = BirthDeathMoveChain(spec, spawn_generator(spec.seed, index))
    configs = chain.run()

    return configs, chain.proposed, chain.accepted


def gibbs_mcmc_chain(spec: SamplerSpec, threads: int = 1) -> SampleSet:
    if spec.method != "mcmc":
        spec = replace(spec, method="mcmc")

    logger.flush("mcmc_start", {"spec": spec.summary(), "model": model_summary(spec.model)})

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(lambda index: run_chain(spec, index), range(spec.chains)))

    proposed = {move: sum(result[1][move] for result in results) for move in MOVES}
    accepted = {move: sum(result[2][move] for result in results) for move in MOVES}
    acceptance = {move: accepted[move] / proposed[move] if proposed[move] > 0 else 0.0 for move in MOVES}

    configs = [config for result in results for config in result[0]]
    sample_set = SampleSet(configs, spec, acceptance, effective_sample_size([result[0] for result in results]))

    logger.flush("mcmc_finish", {"retained": len(configs), "acceptance": acceptance, "ess": sample_set.ess})
    return sample_set


def rejection_block(spec: SamplerSpec, index: int, size: int) -> tuple[list[Configuration], int]:
    rng = spawn_generator(spec.seed, index)

    configs = []
    attempts = 0
    for _ in range(size):
        config, used = rejection_draw(spec.model, spec.window, rng, spec.max_attempts)
        configs.append(config)
        attempts += used

    return configs, attempts


def gibbs_rejection_set(spec: SamplerSpec, threads: int = 1) -> SampleSet:
    sizes = [spec.samples // spec.chains + (1 if index < spec.samples % spec.chains else 0) for index in range(spec.chains)]

    logger.flush("rejection_start", {"spec": spec.summary(), "model": model_summary(spec.model)})

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(lambda index: rejection_block(spec, index, sizes[index]), range(spec.chains)))

    configs = [config for result in results for config in result[0]]
    attempts = sum(result[1] for result in results)

    sample_set = SampleSet(configs, spec, {"rejection": len(configs) / attempts}, float(len(configs)), attempts)

    logger.flush("rejection_finish", {"samples": len(configs), "attempts": attempts})
    return sample_set


def sample(spec: SamplerSpec, threads: int = 1) -> SampleSet:
    if spec.method == "rejection":
        return gibbs_rejection_set(spec, threads)

    return gibbs_mcmc_chain(spec, threads)


def write_sample_set(directory: Path, s: SampleSet) -> None:
    directory.mkdir(parents=True, exist_ok=True)

    for i, config in enumerate(s.configs):
        write_configuration(directory / f"config_{i:06d}.txt", config)

    write_manifest(directory / "manifest.txt", {
        "count": len(s.configs),
        "spec": s.spec.summary(),
        "model": model_summary(s.spec.model),
        "acceptance": s.acceptance,
        "ess": s.ess,
        "attempts": s.attempts,
    })


def read_sample_set(directory: Path, model: EnergyModel) -> SampleSet:
    """Loads a sample directory; the model is rebuilt by the caller since manifests only describe it."""
    entries = read_manifest(directory / "manifest.txt")

    def floats(key: str) -> tuple[float, ...]:
        return tuple(float(value) for value in entries[key].split(","))

    spec = SamplerSpec(
        model=model,
        window=Box(floats("spec.window.lower"), floats("spec.window.upper")),
        method=entries["spec.method"],
        seed=int(entries["spec.seed"]),
        mcmc_sweeps=int(entries["spec.mcmc_sweeps"]),
        burn_in=int(entries["spec.burn_in"]),
        thinning=int(entries["spec.thinning"]),
        proposal_mix=floats("spec.proposal_mix"),
        samples=int(entries["spec.samples"]),
        max_attempts=int(entries["spec.max_attempts"]),
        chains=int(entries["spec.chains"]),
    )

    configs = [read_configuration(directory / f"config_{i:06d}.txt") for i in range(int(entries["count"]))]
    acceptance = {key.split(".", 1)[1]: float(value) for key, value in entries.items() if key.startswith("acceptance.")}

    return SampleSet(configs, spec, acceptance, float(entries["ess"]), int(entries["attempts"]))
