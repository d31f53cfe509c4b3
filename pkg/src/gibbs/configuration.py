from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Callable, Iterator, Optional, Union

import numpy as np

from errors import DimensionMismatchError, OverlapError
from geometry import Box, Coordinates, Point, Region, as_point, as_points


class Configuration:
    """A finite set of pairwise distinct points in R^d, stored as a read-only (n, d) array."""

    def __init__(self, points: Union[np.ndarray, list], dim: Optional[int] = None) -> None:
        if dim is None:
            dim = np.asarray(points, dtype=float).reshape(len(points), -1).shape[1] if len(points) > 0 else 1

        array = np.array(as_points(points, dim), dtype=float)
        if len(array) > 1 and len(np.unique(array, axis=0)) != len(array):
            raise OverlapError("Configuration points must be pairwise distinct")

        array.setflags(write=False)

        self._points = array
        self.dim = dim

    @classmethod
    def empty(cls, dim: int) -> "Configuration":
        return cls(np.zeros((0, dim)), dim)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented

        return self.dim == other.dim and np.array_equal(self.sorted_points(), other.sorted_points())

    def __hash__(self) -> int:
        return hash((self.dim, self.sorted_points().tobytes()))

    def __repr__(self) -> str:
        return f"Configuration(dim={self.dim}, count={len(self)})"

    def sorted_points(self) -> np.ndarray:
        if len(self._points) == 0:
            return self._points

        return self._points[np.lexsort(self._points.T[::-1])]


@dataclass(frozen=True)
class WindowedConfiguration:
    config: Configuration
    window: Box

    def __post_init__(self) -> None:
        if self.config.dim != self.window.dim:
            raise DimensionMismatchError(self.window.dim, self.config.dim)

        if not np.all(self.window.contains(self.config.points)):
            raise ValueError(f"Every point must lie in the window {self.window}")


RegionPredicate = Union[Region, Callable[[np.ndarray], np.ndarray], None]


def restrict(w: Configuration, delta: RegionPredicate) -> Configuration:
    if delta is None:
        return w

    mask = delta.contains(w.points) if hasattr(delta, "contains") else np.asarray(delta(w.points), dtype=bool)
    return Configuration(w.points[mask], w.dim)


def translate(w: Configuration, u: Coordinates) -> Configuration:
    u = as_point(u)
    if len(u) != w.dim:
        raise DimensionMismatchError(w.dim, len(u))

    return Configuration(w.points + u, w.dim)


def disjoint_union(a: Configuration, b: Configuration) -> Configuration:
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim)

    if len(a) == 0:
        return b

    if len(b) == 0:
        return a

    try:
        return Configuration(np.concatenate([a.points, b.points]), a.dim)
    except OverlapError:
        raise OverlapError("Configurations share a point, the composition is invalid") from None


def periodize(w: WindowedConfiguration, copies: int) -> WindowedConfiguration:
    """Tiles the window Λ_n by its 2n-translates in every direction up to `copies` tiles away."""
    if not w.window.is_centered_cube():
        raise ValueError(f"Periodization needs a centered cube window ]-n,n]^d, got {w.window}")

    if copies < 0:
        raise ValueError(f"Number of copies must be nonnegative, got {copies}")

    n = w.window.upper[0]
    dim = w.config.dim

    shifts = [2 * n * np.array(u, dtype=float) for u in product(range(-copies, copies + 1), repeat=dim)]
    tiles = [w.config.points + shift for shift in shifts]

    points = np.concatenate(tiles) if len(w.config) > 0 else np.zeros((0, dim))
    return WindowedConfiguration(Configuration(points, dim), Box.centered_cube((2 * copies + 1) * n, dim))


def uniform_in_box(window: Box, size: int, rng: np.random.Generator) -> np.ndarray:
    # upper - side * [0, 1) lands in the half-open ]lower, upper]
    return np.array(window.upper) - window.sides * rng.random((size, window.dim))


def random_shift(w: Configuration, window: Union[Box, Coordinates], rng: np.random.Generator) -> Configuration:
    """translate(w, -U) with U uniform on window; a single point as window is a fixed shift."""
    if isinstance(window, Box):
        u = uniform_in_box(window, 1, rng)[0]
    else:
        u = as_point(window)

    return translate(w, -u)


def wrap_into(w: Configuration, window: Box) -> Configuration:
    """Maps every point into the window along the torus with the window's side lengths as periods."""
    upper = np.array(window.upper)
    points = w.points.copy()

    # points already inside stay bit-identical
    outside = ~window.contains(points)
    wrapped = upper - np.mod(upper - points[outside], window.sides)
    # np.mod can round a tiny negative offset up to a full period, landing on the excluded lower face
    points[outside] = np.where(wrapped > np.array(window.lower), wrapped, upper)

    return Configuration(points, w.dim)


def dumps(w: Configuration) -> str:
    lines = [f"dim={w.dim} count={len(w)}"]
    for point in w.points:
        lines.append(" ".join(f"{value:.17g}" for value in point))

    return "\n".join(lines) + "\n"


def loads(text: str) -> Configuration:
    lines = [line for line in text.splitlines() if line.strip() != ""]
    if len(lines) == 0:
        raise ValueError("Configuration text is empty, expected a 'dim=<d> count=<N>' header")

    header = dict(field.split("=", 1) for field in lines[0].split())
    dim = int(header["dim"])
    count = int(header["count"])

    rows = [[float(value) for value in line.split()] for line in lines[1:]]
    if len(rows) != count:
        raise ValueError(f"Header announces {count} points, found {len(rows)}")

    return Configuration(np.array(rows).reshape(count, dim), dim)


def write_configuration(path: Path, w: Configuration) -> None:
    path.write_text(dumps(w), encoding="utf-8")


def read_configuration(path: Path) -> Configuration:
    return loads(path.read_text(encoding="utf-8"))
