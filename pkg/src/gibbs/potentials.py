import math
from abc import abstractmethod
from typing import Any, Union

import numpy as np
from scipy.special import comb, zeta

from errors import ModelError

Radius = Union[float, np.ndarray]

# Σ_{j≥0} j^m q^j for m = 0..3
GEOMETRIC_MOMENTS = [
    lambda q: 1 / (1 - q),
    lambda q: q / (1 - q) ** 2,
    lambda q: q * (1 + q) / (1 - q) ** 3,
    lambda q: q * (1 + 4 * q + q ** 2) / (1 - q) ** 4,
]


class Potential:
    """An isotropic pair potential φ on [0, ∞), +∞ below its hardcore radius."""

    name = ""

    def __init__(self, beta: float, hardcore_radius: float = 0.0) -> None:
        if not math.isfinite(beta):
            raise ModelError(f"Potential strength must be finite, got {beta}")

        if not hardcore_radius >= 0:
            raise ModelError(f"Hardcore radius must be nonnegative, got {hardcore_radius}")

        self.beta = float(beta)
        self.hardcore_radius = float(hardcore_radius)

    @property
    def tail_monotone_from(self) -> float:
        # every built-in |φ| is non-increasing past the hardcore
        return self.hardcore_radius

    @property
    def support_radius(self) -> float:
        return math.inf

    @property
    def kink_radii(self) -> tuple[float, ...]:
        """Radii where φ is not smooth past the hardcore."""
        return ()

    def __call__(self, r: Radius) -> Radius:
        r = np.asarray(r, dtype=float)
        values = np.where(r < self.hardcore_radius, np.inf, self.profile(np.maximum(r, self.hardcore_radius)))

        return float(values) if values.ndim == 0 else values

    @abstractmethod
    def profile(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def sup_on_interval(self, a: float, b: float) -> float:
        if b < a:
            raise ValueError(f"Empty interval [{a}, {b}]")

        if a < self.hardcore_radius:
            return math.inf

        if a < self.tail_monotone_from:
            raise NotImplementedError(f"{type(self).__name__} must supply its supremum below {self.tail_monotone_from}")

        return abs(float(self(a)))

    def integral(self, a: float, b: float) -> float:
        """∫_a^b φ(r) dr for 0 ≤ a ≤ b."""
        if b <= a:
            return 0.0

        if a < self.hardcore_radius:
            return math.inf

        return float(self.antiderivative(b) - self.antiderivative(a))

    @abstractmethod
    def antiderivative(self, r: Radius) -> Radius:
        """Vectorised F with F' = φ on [hardcore_radius, ∞)."""
        raise NotImplementedError()

    def radial_moment(self, d: int) -> float:
        """∫_0^∞ r^(d-1) |φ(r)| dr."""
        if self.hardcore_radius > 0:
            return math.inf

        return self.absolute_radial_moment(d)

    @abstractmethod
    def absolute_radial_moment(self, d: int) -> float:
        raise NotImplementedError()

    @abstractmethod
    def power_sum(self, k: int, s: float) -> float:
        """Σ_{j≥0} (s + j)^k |φ(s + j)| for s past the monotone tail start."""
        raise NotImplementedError()

    def satisfies_tail_condition(self, d: int) -> bool:
        return math.isfinite(self.power_sum(d - 1, max(1.0, self.tail_monotone_from)))

    def params(self) -> dict[str, Any]:
        return {"name": self.name, "beta": self.beta, "hardcore": self.hardcore_radius}

    def __repr__(self) -> str:
        fields = ", ".join(f"{key}={value}" for key, value in self.params().items() if key != "name")
        return f"{type(self).__name__}({fields})"


class PowerTailPotential(Potential):
    """φ(r) = β min(1, r^-p)."""

    name = "power"

    def __init__(self, beta: float, p: float, hardcore_radius: float = 0.0) -> None:
        super().__init__(beta, hardcore_radius)

        if not p > 0:
            raise ModelError(f"Power-tail exponent must be positive, got {p}")

        self.p = float(p)

    @property
    def kink_radii(self) -> tuple[float, ...]:
        return (1.0,)

    def profile(self, r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.beta * np.minimum(1.0, np.power(r, -self.p))

    def antiderivative(self, r: Radius) -> Radius:
        clipped = np.maximum(r, 1.0)
        if self.p == 1:
            tail = 1 + np.log(clipped)
        else:
            tail = 1 + (1 - clipped ** (1 - self.p)) / (self.p - 1)

        return self.beta * np.where(np.asarray(r) <= 1, r, tail)

    def absolute_radial_moment(self, d: int) -> float:
        if self.p <= d:
            return math.inf

        return abs(self.beta) * (1 / d + 1 / (self.p - d))

    def power_sum(self, k: int, s: float) -> float:
        if self.p - k <= 1:
            return math.inf

        head = 0.0
        t = s
        while t < 1:
            head += t ** k * abs(self.beta)
            t += 1

        return head + abs(self.beta) * float(zeta(self.p - k, t))

    def params(self) -> dict[str, Any]:
        return {**super().params(), "p": self.p}


class ExponentialPotential(Potential):
    """φ(r) = β exp(-κ r)."""

    name = "exponential"

    def __init__(self, beta: float, kappa: float, hardcore_radius: float = 0.0) -> None:
        super().__init__(beta, hardcore_radius)

        if not kappa > 0:
            raise ModelError(f"Exponential decay rate must be positive, got {kappa}")

        self.kappa = float(kappa)

    def profile(self, r: np.ndarray) -> np.ndarray:
        return self.beta * np.exp(-self.kappa * r)

    def antiderivative(self, r: Radius) -> Radius:
        return -self.beta / self.kappa * np.exp(-self.kappa * np.asarray(r))

    def absolute_radial_moment(self, d: int) -> float:
        return abs(self.beta) * math.gamma(d) / self.kappa ** d

    def power_sum(self, k: int, s: float) -> float:
        if k >= len(GEOMETRIC_MOMENTS):
            raise ModelError(f"Closed-form exponential tail sums stop at degree {len(GEOMETRIC_MOMENTS) - 1}, got {k}")

        q = math.exp(-self.kappa)
        moments = sum(comb(k, m, exact=True) * s ** (k - m) * GEOMETRIC_MOMENTS[m](q) for m in range(k + 1))

        return abs(self.beta) * math.exp(-self.kappa * s) * moments

    def params(self) -> dict[str, Any]:
        return {**super().params(), "kappa": self.kappa}


class StepPotential(Potential):
    """φ(r) = β 1[r ≤ range], a Strauss-type finite range potential."""

    name = "step"

    def __init__(self, beta: float, range: float, hardcore_radius: float = 0.0) -> None:
        super().__init__(beta, hardcore_radius)

        if not range > 0:
            raise ModelError(f"Step range must be positive, got {range}")

        if hardcore_radius > range:
            raise ModelError(f"Hardcore radius {hardcore_radius} exceeds the step range {range}")

        self.range = float(range)

    @property
    def support_radius(self) -> float:
        return self.range

    @property
    def kink_radii(self) -> tuple[float, ...]:
        return (self.range,)

    def profile(self, r: np.ndarray) -> np.ndarray:
        return np.where(r <= self.range, self.beta, 0.0)

    def antiderivative(self, r: Radius) -> Radius:
        return self.beta * np.minimum(r, self.range)

    def absolute_radial_moment(self, d: int) -> float:
        return abs(self.beta) * self.range ** d / d

    def power_sum(self, k: int, s: float) -> float:
        total = 0.0
        t = s
        while t <= self.range:
            total += t ** k * abs(self.beta)
            t += 1

        return total

    def params(self) -> dict[str, Any]:
        return {**super().params(), "range": self.range}


POTENTIALS = {
    "power": PowerTailPotential,
    "exponential": ExponentialPotential,
    "step": StepPotential,
}
