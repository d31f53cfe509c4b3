import math
from dataclasses import dataclass
from itertools import product
from typing import Protocol, Sequence, Union

import numpy as np

from errors import DimensionMismatchError

Point = np.ndarray
Coordinates = Union[Sequence[float], np.ndarray]

SUPPORTED_DIMENSIONS = (1, 2, 3)


def as_point(coords: Coordinates) -> Point:
    point = np.asarray(coords, dtype=float).reshape(-1)
    if not np.all(np.isfinite(point)):
        raise ValueError(f"Point coordinates must be finite, got {point.tolist()}")

    return point


def as_points(points: Union[np.ndarray, Sequence[Coordinates]], dim: int) -> np.ndarray:
    array = np.asarray(points, dtype=float)
    if array.size == 0:
        return np.zeros((0, dim))

    if array.ndim == 1:
        array = array.reshape(-1, dim) if dim == 1 else array.reshape(1, -1)

    if array.shape[1] != dim:
        raise DimensionMismatchError(dim, array.shape[1])

    if not np.all(np.isfinite(array)):
        raise ValueError("Point coordinates must be finite")

    return array


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def unit_sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d, 2 in d=1, 2π in d=2, 4π in d=3."""
    return d * unit_ball_volume(d)


class Region(Protocol):
    dim: int

    def contains(self, points: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ]lower, upper], lower faces excluded and upper faces included."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(value) for value in as_point(self.lower)))
        object.__setattr__(self, "upper", tuple(float(value) for value in as_point(self.upper)))

        if len(self.lower) != len(self.upper):
            raise DimensionMismatchError(len(self.lower), len(self.upper))

        if any(low >= high for low, high in zip(self.lower, self.upper)):
            raise ValueError(f"Box lower corner {self.lower} must be strictly below upper corner {self.upper}")

    @classmethod
    def centered_cube(cls, n: float, dim: int) -> "Box":
        return cls((-n,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    @property
    def center(self) -> Point:
        return (np.array(self.upper) + np.array(self.lower)) / 2

    def volume(self) -> float:
        return float(np.prod(self.sides))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    def corners(self) -> np.ndarray:
        return np.array(list(product(*zip(self.lower, self.upper))))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = as_points(points, self.dim)
        return np.all((points > np.array(self.lower)) & (points <= np.array(self.upper)), axis=1)

    def distance(self, points: np.ndarray) -> np.ndarray:
        points = as_points(points, self.dim)
        below = np.maximum(np.array(self.lower) - points, 0)
        above = np.maximum(points - np.array(self.upper), 0)
        return np.linalg.norm(below + above, axis=1)

    def translate(self, u: Coordinates) -> "Box":
        u = as_point(u)
        if len(u) != self.dim:
            raise DimensionMismatchError(self.dim, len(u))

        return Box(tuple(np.array(self.lower) + u), tuple(np.array(self.upper) + u))

    def is_centered_cube(self) -> bool:
        n = self.upper[0]
        return all(high == n for high in self.upper) and all(low == -n for low in self.lower)

    def within(self, other: "Box", margin: float = 0.0) -> bool:
        """Whether self ⊕ B(0, margin) fits inside the closure of other."""
        return all(low - margin >= other_low and high + margin <= other_high
                   for low, high, other_low, other_high in zip(self.lower, self.upper, other.lower, other.upper))


@dataclass(frozen=True)
class DilatedRegion:
    """base ⊕ B(0, radius), the Euclidean dilation of a box."""

    base: Box
    radius: float

    def __post_init__(self) -> None:
        if not self.radius >= 0:
            raise ValueError(f"Dilation radius must be nonnegative, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.base.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.base.contains(points) | (self.base.distance(points) <= self.radius)

    def volume(self) -> float:
        return dilated_volume(self.base, self.radius)


@dataclass(frozen=True)
class Shell:
    """Points whose distance to base lies in (inner, inner + 1]."""

    base: Box
    inner: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        distances = self.base.distance(points)
        return (distances > self.inner) & (distances <= self.inner + 1) & ~self.base.contains(points)

    def volume(self) -> float:
        return shell_volume(self.base, self.inner)


@dataclass(frozen=True)
class Complement:
    region: Region

    @property
    def dim(self) -> int:
        return self.region.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        return ~self.region.contains(points)


@dataclass(frozen=True)
class Difference:
    region: Region
    removed: Region

    @property
    def dim(self) -> int:
        return self.region.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.region.contains(points) & ~self.removed.contains(points)


def leb_volume(b: Box) -> float:
    return b.volume()


def dist_to_box(x: Coordinates, b: Box) -> float:
    x = as_point(x)
    if len(x) != b.dim:
        raise DimensionMismatchError(b.dim, len(x))

    return float(b.distance(x.reshape(1, -1))[0])


def shell_contains(x: Coordinates, delta: Box, offset0: float, l: int) -> bool:
    distance = dist_to_box(x, delta)
    return bool(offset0 + l < distance <= offset0 + l + 1)


def steiner_coefficients(b: Box) -> np.ndarray:
    """Coefficients c_k with Leb(b ⊕ B(0, r)) = Σ_k c_k r^k."""
    symmetric = np.poly(-b.sides)  # [1, e_1, ..., e_d]
    return np.array([unit_ball_volume(k) * symmetric[b.dim - k] for k in range(b.dim + 1)])


def dilated_volume(b: Box, r: float) -> float:
    coefficients = steiner_coefficients(b)
    return float(sum(coefficient * r ** k for k, coefficient in enumerate(coefficients)))


def shell_volume(b: Box, r: float) -> float:
    return dilated_volume(b, r + 1) - dilated_volume(b, r)


def cover_radius(delta: Box, window: Box) -> float:
    return float(np.max(delta.distance(window.corners())))
