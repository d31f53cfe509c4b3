import math
from abc import abstractmethod
from typing import Any, Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import comb

from configuration import Configuration
from errors import DivergentTailError, InfiniteEnvironmentError, ModelError, UnsupportedDimensionError
from geometry import SUPPORTED_DIMENSIONS, Box, Coordinates, Shell, as_point, as_points, dilated_volume, steiner_coefficients, unit_sphere_area
from logger import logger
from potentials import Potential

Points = Union[Configuration, np.ndarray]

CLOUD_MAX_REFINEMENTS = 30
GAUSS_COARSE = np.polynomial.legendre.leggauss(8)
GAUSS_FINE = np.polynomial.legendre.leggauss(16)


def as_array(w: Points, dim: int) -> np.ndarray:
    return w.points if isinstance(w, Configuration) else as_points(w, dim)


def shifted_polynomial(coefficients: np.ndarray, shift: float) -> np.ndarray:
    """Coefficients of t ↦ P(t + shift) - P(t) for P(t) = Σ_k c_k t^k."""
    shifted = np.zeros(len(coefficients))
    for k, coefficient in enumerate(coefficients):
        for m in range(k):
            shifted[m] += coefficient * comb(k, m, exact=True) * shift ** (k - m)

    return shifted


class EnergyModel:
    """
    An energy function H on finite configurations together with its stability constant A
    and the intensity regularity data: shells Δ_l = Δ ⊕ B(0, shell_offset0 + l), the shell
    increment bounds G, the sequence α and the affine ψ(x) = a + b·x.

    Shell quantities take the inner shell radius r = shell_offset0 + l so that sums of
    models can evaluate each term on shared shells.
    """

    kind = ""
    tail_formula = ""

    def __init__(self, dim: int, stability_A: float, shell_offset0: float) -> None:
        if dim not in SUPPORTED_DIMENSIONS:
            raise UnsupportedDimensionError(f"Dimension must be one of {SUPPORTED_DIMENSIONS}, got {dim}")

        if not stability_A <= 0:
            raise ModelError(f"Stability constant must be nonpositive, got {stability_A}")

        self.dim = dim
        self.stability_A = float(stability_A)
        self.shell_offset0 = float(shell_offset0)

    @property
    def zeta(self) -> float:
        return math.exp(-self.stability_A)

    @abstractmethod
    def energy(self, points: np.ndarray) -> float:
        raise NotImplementedError()

    def local_energy(self, inner: np.ndarray, outer: np.ndarray) -> float:
        """H(inner ∪ outer) - H(outer), the energy cost of adding inner to outer."""
        outer_energy = self.energy(outer)
        if outer_energy == math.inf:
            raise InfiniteEnvironmentError("The environment has infinite energy, the local energy is undefined")

        total = self.energy(np.concatenate([inner, outer]) if len(outer) > 0 else inner)
        return total - outer_energy if total != math.inf else math.inf

    @abstractmethod
    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        raise NotImplementedError()

    @abstractmethod
    def alpha(self, delta: Box, radius: float) -> float:
        raise NotImplementedError()

    @abstractmethod
    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        """Σ_{j≥0} α at the shells of inner radius radius + j."""
        raise NotImplementedError()

    @abstractmethod
    def psi(self, delta: Box) -> tuple[float, float]:
        raise NotImplementedError()

    def params(self) -> dict[str, Any]:
        return {}

    def __repr__(self) -> str:
        fields = ", ".join(f"{key}={value}" for key, value in self.params().items())
        return f"{type(self).__name__}(dim={self.dim}, {fields})"


class PairwiseModel(EnergyModel):
    kind = "pairwise"
    tail_formula = "pairwise: alpha(r) = Leb(shell(r)) * |phi(r)|, tail by closed-form power sums"

    def __init__(self, potential: Potential, dim: int, stability_A: Optional[float] = None) -> None:
        if not potential.satisfies_tail_condition(dim):
            raise DivergentTailError(f"Tail condition violated: Σ l^(d-1) sup|φ| diverges for {potential!r} in dimension {dim}")

        if stability_A is None:
            if potential.beta < 0:
                raise ModelError("Pairwise models with a negative potential need an explicit stability constant")

            stability_A = 0.0

        super().__init__(dim, stability_A, potential.hardcore_radius)

        self.potential = potential

    def energy(self, points: np.ndarray) -> float:
        if len(points) < 2:
            return 0.0

        values = self.potential(pdist(points))
        return float(np.sum(values))

    def local_energy(self, inner: np.ndarray, outer: np.ndarray) -> float:
        total = self.energy(inner)
        if len(inner) > 0 and len(outer) > 0:
            total += float(np.sum(self.potential(cdist(inner, outer))))

        return total

    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        count = int(np.sum(Shell(delta, radius).contains(outside)))
        if count == 0:
            return 0.0

        return count * self.potential.sup_on_interval(radius, radius + 1 + delta.diameter())

    def alpha(self, delta: Box, radius: float) -> float:
        volume = dilated_volume(delta, radius + 1) - dilated_volume(delta, radius)
        return volume * self.potential.sup_on_interval(radius, radius + 1 + delta.diameter())

    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        coefficients = shifted_polynomial(steiner_coefficients(delta), 1.0)
        return sum(coefficient * self.potential.power_sum(m, radius) for m, coefficient in enumerate(coefficients) if coefficient != 0)

    def psi(self, delta: Box) -> tuple[float, float]:
        return 0.0, 1.0

    def params(self) -> dict[str, Any]:
        return {"potential": self.potential.params(), "A": self.stability_A}


class FiniteRangeModel(PairwiseModel):
    kind = "finite_range"
    tail_formula = "finite_range: alpha = 0 beyond the interaction range"

    def __init__(self, potential: Potential, dim: int, stability_A: Optional[float] = None) -> None:
        if not math.isfinite(potential.support_radius):
            raise ModelError(f"Finite range models need a compactly supported potential, got {potential!r}")

        super().__init__(potential, dim, stability_A)

        self.shell_offset0 = max(potential.support_radius, potential.hardcore_radius)

    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        return 0.0

    def alpha(self, delta: Box, radius: float) -> float:
        return 0.0

    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        return 0.0

    def psi(self, delta: Box) -> tuple[float, float]:
        return 0.0, 0.0


class CloudModel(EnergyModel):
    kind = "cloud"
    tail_formula = "cloud: alpha(r) = Leb(shell(r) + B(0,R)) * |phi(r - R)|, tail by closed-form power sums"

    def __init__(self, potential: Potential, R: float, dim: int, quad_tol: float = 1e-4, stability_A: Optional[float] = None) -> None:
        if dim not in (1, 2):
            raise UnsupportedDimensionError(f"Cloud energies are integrated in dimensions 1 and 2 only, got {dim}")

        if not R > 0:
            raise ModelError(f"Cloud radius must be positive, got {R}")

        if not quad_tol > 0:
            raise ModelError(f"Quadrature tolerance must be positive, got {quad_tol}")

        if potential.hardcore_radius > 0:
            raise ModelError("Cloud models integrate φ over balls and cannot use a hardcore potential")

        if not math.isfinite(potential.radial_moment(dim)) or not potential.satisfies_tail_condition(dim):
            raise DivergentTailError(f"Tail condition violated: ∫ r^(d-1)|φ| diverges for {potential!r} in dimension {dim}")

        if stability_A is None:
            stability_A = 0.0 if potential.beta >= 0 else -self.domination_constant(potential, dim)

        super().__init__(dim, stability_A, 2 * R)

        self.potential = potential
        self.R = float(R)
        self.quad_tol = float(quad_tol)

    @staticmethod
    def domination_constant(potential: Potential, dim: int) -> float:
        """σ_(d-1) ∫ r^(d-1)|φ|, bounding |H(ω)| / |ω|."""
        return unit_sphere_area(dim) * potential.radial_moment(dim)

    def energy(self, points: np.ndarray) -> float:
        return cloud_energy(self.potential, self.R, points, self.quad_tol)

    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        count = int(np.sum(Shell(delta, radius).contains(outside)))
        sup = self.potential.sup_on_interval(radius - self.R, radius + 1 + self.R + delta.diameter())

        return (count * dilated_volume(delta, self.R) + self.dilated_shell_volume(delta, radius)) * sup

    def dilated_shell_volume(self, delta: Box, radius: float) -> float:
        return dilated_volume(delta, radius + 1 + self.R) - dilated_volume(delta, radius - self.R)

    def alpha(self, delta: Box, radius: float) -> float:
        return self.dilated_shell_volume(delta, radius) * self.potential.sup_on_interval(radius - self.R, radius + 1 + self.R + delta.diameter())

    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        coefficients = shifted_polynomial(steiner_coefficients(delta), 1 + 2 * self.R)
        return sum(coefficient * self.potential.power_sum(m, radius - self.R) for m, coefficient in enumerate(coefficients) if coefficient != 0)

    def psi(self, delta: Box) -> tuple[float, float]:
        return 1.0, dilated_volume(delta, self.R)

    def params(self) -> dict[str, Any]:
        return {"potential": self.potential.params(), "R": self.R, "quad_tol": self.quad_tol, "A": self.stability_A}


class ActivityModel(EnergyModel):
    """H(ω) = θ|ω| + H(∅), a Poisson process of intensity exp(-θ)."""

    kind = "activity"
    tail_formula = "activity: alpha = 0"

    def __init__(self, theta: float, dim: int, empty_energy: float = 0.0) -> None:
        if not empty_energy >= 0:
            raise ModelError(f"Stability forces H(∅) ≥ 0, got {empty_energy}")

        super().__init__(dim, min(theta, 0.0), 0.0)

        self.theta = float(theta)
        self.empty_energy = float(empty_energy)

    def energy(self, points: np.ndarray) -> float:
        return self.theta * len(points) + self.empty_energy

    def local_energy(self, inner: np.ndarray, outer: np.ndarray) -> float:
        return self.theta * len(inner)

    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        return 0.0

    def alpha(self, delta: Box, radius: float) -> float:
        return 0.0

    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        return 0.0

    def psi(self, delta: Box) -> tuple[float, float]:
        return 0.0, 0.0

    def params(self) -> dict[str, Any]:
        return {"theta": self.theta, "empty_energy": self.empty_energy, "A": self.stability_A}


class SumModel(EnergyModel):
    kind = "sum"

    def __init__(self, terms: list[EnergyModel]) -> None:
        if len(terms) == 0:
            raise ModelError("A sum model needs at least one term")

        dims = {term.dim for term in terms}
        if len(dims) != 1:
            raise ModelError(f"Summed models must share a dimension, got {sorted(dims)}")

        super().__init__(terms[0].dim, sum(term.stability_A for term in terms), max(term.shell_offset0 for term in terms))

        self.terms = terms

    @property
    def tail_formula(self) -> str:
        return " + ".join(f"({term.tail_formula})" for term in self.terms)

    def energy(self, points: np.ndarray) -> float:
        return float(sum(term.energy(points) for term in self.terms))

    def local_energy(self, inner: np.ndarray, outer: np.ndarray) -> float:
        return float(sum(term.local_energy(inner, outer) for term in self.terms))

    def shell_bound(self, outside: np.ndarray, delta: Box, radius: float) -> float:
        return sum(term.shell_bound(outside, delta, radius) for term in self.terms)

    def alpha(self, delta: Box, radius: float) -> float:
        return sum(term.alpha(delta, radius) for term in self.terms)

    def alpha_tail_from(self, delta: Box, radius: float) -> float:
        return sum(term.alpha_tail_from(delta, radius) for term in self.terms)

    def psi(self, delta: Box) -> tuple[float, float]:
        coefficients = [term.psi(delta) for term in self.terms]
        return sum(a for a, _ in coefficients), sum(b for _, b in coefficients)

    def params(self) -> dict[str, Any]:
        return {"terms": [{"kind": term.kind, **term.params()} for term in self.terms], "A": self.stability_A}


def merged_intervals(centers: np.ndarray, R: float) -> np.ndarray:
    intervals = []
    for center in np.sort(centers):
        if len(intervals) > 0 and center - R <= intervals[-1][1]:
            intervals[-1][1] = center + R
        else:
            intervals.append([center - R, center + R])

    return np.array(intervals)


def cloud_energy_exact_1d(phi: Potential, R: float, points: np.ndarray) -> float:
    intervals = merged_intervals(points[:, 0], R)

    # offsets of every interval end relative to every point, shape (n, m)
    low = intervals[None, :, 0] - points[:, 0, None]
    high = intervals[None, :, 1] - points[:, 0, None]

    F = phi.antiderivative
    integrals = F(np.maximum(high, 0)) - F(np.maximum(low, 0)) + F(np.maximum(-low, 0)) - F(np.maximum(-high, 0))

    return float(np.sum(integrals))


def circle_coverage(r: np.ndarray, distances: np.ndarray, angles: np.ndarray, R: float) -> np.ndarray:
    """Angular measure of the circle of radius r around a point that lies inside a union of discs of radius R."""
    r = r[:, None]
    d = distances[None, :]

    full = np.any(r + d <= R, axis=1)
    crossing = (np.abs(r - d) < R) & (r + d > R)

    with np.errstate(divide="ignore", invalid="ignore"):
        cosine = (r ** 2 + d ** 2 - R ** 2) / (2 * r * d)
    half_width = np.where(crossing, np.arccos(np.clip(cosine, -1.0, 1.0)), 0.0)

    # arcs on [0, 2π), the wrapped part of an arc becomes a second interval starting at 0
    starts = np.mod(angles[None, :] - half_width, 2 * math.pi)
    ends = starts + 2 * half_width
    starts = np.concatenate([starts, np.zeros_like(starts)], axis=1)
    ends = np.concatenate([np.minimum(ends, 2 * math.pi), np.maximum(ends - 2 * math.pi, 0.0)], axis=1)

    order = np.argsort(starts, axis=1)
    starts = np.take_along_axis(starts, order, axis=1)
    ends = np.take_along_axis(ends, order, axis=1)

    reach = np.maximum.accumulate(ends, axis=1)
    previous = np.concatenate([np.zeros((len(reach), 1)), reach[:, :-1]], axis=1)
    covered = np.sum(np.maximum(ends - np.maximum(starts, previous), 0.0), axis=1)

    return np.where(full, 2 * math.pi, covered)


def cloud_energy_polar_2d(phi: Potential, R: float, points: np.ndarray, center: np.ndarray, tolerance: float) -> tuple[float, float]:
    """
    ∫_{L^R} φ(|x - center|) dx in polar coordinates around center, with the
    radial integral split at every radius where the coverage or φ is not smooth.

    Each piece is mapped by r = a + (b - a)(1 - cos t) / 2, which smooths the square-root
    behaviour of the coverage at tangencies, and bisected until the difference between
    the coarse and fine Gauss-Legendre rules fits its share of tolerance.
    Returns the value and the error estimate left over.
    """
    offsets = points - center
    distances = np.hypot(offsets[:, 0], offsets[:, 1])
    angles = np.arctan2(offsets[:, 1], offsets[:, 0])

    upper = min(float(np.max(distances)) + R, phi.support_radius)
    breaks = np.concatenate([[0.0, R, upper], distances - R, distances + R, phi.kink_radii])
    breaks = np.unique(breaks[(breaks >= 0) & (breaks <= upper)])

    a, b = breaks[:-1], breaks[1:]
    keep = b - a > 0
    a, b = a[keep], b[keep]
    t0, t1 = np.zeros(len(a)), np.full(len(a), math.pi)

    total = 0.0
    missed = 0.0
    for _ in range(CLOUD_MAX_REFINEMENTS):
        if len(a) == 0:
            break

        values = []
        for nodes, weights in [GAUSS_COARSE, GAUSS_FINE]:
            half = (t1 - t0)[:, None] / 2
            t = (t0 + t1)[:, None] / 2 + half * nodes[None, :]
            r = a[:, None] + (b - a)[:, None] * (1 - np.cos(t)) / 2
            jacobian = (b - a)[:, None] * np.sin(t) / 2

            coverage = circle_coverage(r.ravel(), distances, angles, R).reshape(r.shape)
            integrand = phi(r) * r * coverage * jacobian
            values.append(np.sum(half * weights[None, :] * integrand, axis=1))

        coarse, fine = values
        error = np.abs(fine - coarse)
        share = tolerance * (t1 - t0) / (math.pi * len(breaks))

        done = error <= share
        total += float(np.sum(fine[done]))

        a, b, t0, t1 = a[~done], b[~done], t0[~done], t1[~done]
        middle = (t0 + t1) / 2
        a, b = np.concatenate([a, a]), np.concatenate([b, b])
        t0, t1 = np.concatenate([t0, middle]), np.concatenate([middle, t1])
    else:
        if len(a) > 0:
            total += float(np.sum(fine[~done]))
            missed = float(np.sum(error[~done]))

    return total, missed


def cloud_energy(phi: Potential, R: float, w: Points, quad_tol: float = 1e-4) -> float:
    points = w.points if isinstance(w, Configuration) else np.asarray(w, dtype=float)
    if len(points) == 0:
        return 0.0

    points = points.reshape(len(points), -1)
    dim = points.shape[1]

    if dim == 1:
        return cloud_energy_exact_1d(phi, R, points)

    if dim != 2:
        raise UnsupportedDimensionError(f"Cloud energies are integrated in dimensions 1 and 2 only, got {dim}")

    tolerance = quad_tol * (1 + len(points))

    total = 0.0
    missed = 0.0
    for center in points:
        value, error = cloud_energy_polar_2d(phi, R, points, center, tolerance / len(points))
        total += value
        missed += error

    if missed > 0:
        logger.print(f"Cloud quadrature left an error estimate of {missed:g} above tolerance {tolerance:g}")
        logger.flush("cloud_quadrature_tolerance_missed", {"points": len(points), "error": missed, "tolerance": tolerance})

    return total


def pairwise_energy(phi: Potential, w: Points) -> float:
    points = w.points if isinstance(w, Configuration) else np.asarray(w, dtype=float)
    if len(points) < 2:
        return 0.0

    return float(np.sum(phi(pdist(points.reshape(len(points), -1)))))


def total_energy(m: EnergyModel, w: Points) -> float:
    return m.energy(as_array(w, m.dim))


def shell_increment_bound(m: EnergyModel, w_outside: Points, delta: Box, l: int) -> float:
    if l < 0:
        raise ValueError(f"Shell level must be nonnegative, got {l}")

    return m.shell_bound(as_array(w_outside, m.dim), delta, m.shell_offset0 + l)


def alpha_tail(m: EnergyModel, delta: Box, l: int) -> float:
    if l < 0:
        raise ValueError(f"Shell level must be nonnegative, got {l}")

    return m.alpha_tail_from(delta, m.shell_offset0 + l)


def sum_models(a: EnergyModel, b: EnergyModel) -> SumModel:
    if a.dim != b.dim:
        raise ModelError(f"Summed models must share a dimension, got {a.dim} and {b.dim}")

    terms = []
    for model in (a, b):
        terms.extend(model.terms if isinstance(model, SumModel) else [model])

    return SumModel(terms)


def conditional_intensity(m: EnergyModel, x: Coordinates, w: Points) -> float:
    """Papangelou conditional intensity exp(-(H(w ∪ {x}) - H(w)))."""
    h = m.local_energy(as_point(x).reshape(1, -1), as_array(w, m.dim))
    return math.exp(-h)


def model_summary(m: EnergyModel) -> dict[str, Any]:
    return {
        "kind": m.kind,
        "dim": m.dim,
        "params": m.params(),
        "stability_A": m.stability_A,
        "zeta": m.zeta,
        "shell_offset0": m.shell_offset0,
        "alpha_tail_formula": m.tail_formula,
    }
