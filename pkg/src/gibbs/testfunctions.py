from abc import abstractmethod
from itertools import product

import numpy as np
from scipy.spatial.distance import pdist
from scipy.spatial import cKDTree

from geometry import Box


class LocalFunction:
    """A bounded function of a configuration that only looks at delta and `neighborhood` around it."""

    name = ""

    def __init__(self, delta: Box, neighborhood: float = 0.0) -> None:
        self.delta = delta
        self.neighborhood = neighborhood

    @abstractmethod
    def __call__(self, points: np.ndarray) -> float:
        raise NotImplementedError()

    def inside(self, points: np.ndarray) -> np.ndarray:
        return points[self.delta.contains(points)]

    def __repr__(self) -> str:
        return f"{self.name}@{self.delta.lower}..{self.delta.upper}"


class ConstantFunction(LocalFunction):
    name = "constant"

    def __call__(self, points: np.ndarray) -> float:
        return 1.0


class CountFunction(LocalFunction):
    name = "count"

    def __init__(self, delta: Box, cap: int) -> None:
        super().__init__(delta)
        self.cap = cap

    def __call__(self, points: np.ndarray) -> float:
        return float(min(int(np.sum(self.delta.contains(points))), self.cap))


class VacancyFunction(LocalFunction):
    name = "vacancy"

    def __call__(self, points: np.ndarray) -> float:
        return 0.0 if np.any(self.delta.contains(points)) else 1.0


class PairCountFunction(LocalFunction):
    name = "pairs"

    def __init__(self, delta: Box, radius: float, cap: int) -> None:
        super().__init__(delta)
        self.radius = radius
        self.cap = cap

    def __call__(self, points: np.ndarray) -> float:
        inside = self.inside(points)
        if len(inside) < 2:
            return 0.0

        return float(min(int(np.sum(pdist(inside) <= self.radius)), self.cap))


class NearestNeighborFunction(LocalFunction):
    """1 when some point of delta has another point within radius."""

    name = "nn"

    def __init__(self, delta: Box, radius: float) -> None:
        super().__init__(delta, radius)
        self.radius = radius

    def __call__(self, points: np.ndarray) -> float:
        inside = self.inside(points)
        if len(inside) == 0 or len(points) < 2:
            return 0.0

        distances, _ = cKDTree(points).query(inside, k=2)
        return 1.0 if np.any(distances[:, 1] <= self.radius) else 0.0


FUNCTIONS = ("constant", "count", "vacancy", "pairs", "nn")


def build_function(name: str, delta: Box, radius: float, cap: int) -> LocalFunction:
    if name == "constant":
        return ConstantFunction(delta)
    elif name == "count":
        return CountFunction(delta, cap)
    elif name == "vacancy":
        return VacancyFunction(delta)
    elif name == "pairs":
        return PairCountFunction(delta, radius, cap)
    elif name == "nn":
        return NearestNeighborFunction(delta, radius)

    raise ValueError(f"Unknown test function '{name}', expected one of {', '.join(FUNCTIONS)}")


def standard_battery(deltas: list[Box], names: tuple[str, ...] = ("count", "vacancy", "pairs", "nn"), radius: float = 0.25, cap: int = 20) -> list[tuple[Box, LocalFunction]]:
    return [(delta, build_function(name, delta, radius, cap)) for delta, name in product(deltas, names)]
