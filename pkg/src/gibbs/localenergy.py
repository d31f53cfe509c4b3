import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from configuration import Configuration, WindowedConfiguration
from energy import EnergyModel, alpha_tail
from errors import InfiniteEnvironmentError
from geometry import Box, DilatedRegion, cover_radius
from logger import logger


@dataclass(frozen=True)
class CertifiedLocalEnergy:
    value: float
    level: int
    pathwise_bound: float
    exterior_bound: float
    expectation_bound: float
    exact: bool
    reached: bool


def shell_region(m: EnergyModel, delta: Box, l: int) -> DilatedRegion:
    if l < 0:
        raise ValueError(f"Shell level must be nonnegative, got {l}")

    return DilatedRegion(delta, m.shell_offset0 + l)


def cover_level(m: EnergyModel, delta: Box, window: Box) -> int:
    return max(0, math.ceil(cover_radius(delta, window) - m.shell_offset0))


def split(points: np.ndarray, delta: Box) -> tuple[np.ndarray, np.ndarray]:
    inside = delta.contains(points)
    return points[inside], points[~inside]


def check_environment(m: EnergyModel, outer: np.ndarray) -> None:
    if m.energy(outer) == math.inf:
        raise InfiniteEnvironmentError("The environment has infinite energy, the local energy is undefined")


def local_energy_window(m: EnergyModel, w: WindowedConfiguration, delta: Box) -> float:
    """H(ω_Λ) - H(ω_Λ\\Δ), the exact local energy of a finite configuration."""
    if not delta.within(w.window):
        raise ValueError(f"{delta} must lie inside the window {w.window}")

    inner, outer = split(w.config.points, delta)
    check_environment(m, outer)

    return m.local_energy(inner, outer)


def truncated_local_energy(m: EnergyModel, w: Union[Configuration, WindowedConfiguration], delta: Box, l: int) -> float:
    """H(ω_Δl) - H(ω_Δl\\Δ)."""
    config = w.config if isinstance(w, WindowedConfiguration) else w
    points = config.points[shell_region(m, delta, l).contains(config.points)]

    inner, outer = split(points, delta)
    check_environment(m, outer)

    return m.local_energy(inner, outer)


def psi_value(m: EnergyModel, delta: Box, xi_cap: float) -> float:
    a, b = m.psi(delta)
    return a + b * xi_cap


def realized_shell_bounds(m: EnergyModel, outside: np.ndarray, delta: Box, levels: int) -> np.ndarray:
    return np.array([m.shell_bound(outside, delta, m.shell_offset0 + j) for j in range(levels)])


def tail_bound(m: EnergyModel, w_outside: np.ndarray, delta: Box, l: int, l_cover: int, xi_cap: float) -> float:
    """
    C^l realised as the shell bounds G^j for l ≤ j < l_cover, where points are visible,
    plus ψ(ξ)·Σ_{j≥l_cover} α_j for the unseen exterior.
    """
    bounds = realized_shell_bounds(m, w_outside, delta, l_cover)
    exterior = psi_value(m, delta, xi_cap) * alpha_tail(m, delta, max(l, l_cover)) if xi_cap > 0 else 0.0

    return float(np.sum(bounds[l:])) + exterior


def certified_local_energy(m: EnergyModel, w: WindowedConfiguration, delta: Box, eps: float, xi_cap: float = 0.0) -> CertifiedLocalEnergy:
    if not eps > 0:
        raise ValueError(f"Tolerance must be positive, got {eps}")

    if not xi_cap >= 0:
        raise ValueError(f"Intensity cap must be nonnegative, got {xi_cap}")

    inner, outside = split(w.config.points, delta)
    count = len(inner)

    l_cover = cover_level(m, delta, w.window)
    psi = psi_value(m, delta, xi_cap)

    if count == 0:
        return CertifiedLocalEnergy(0.0, 0, 0.0, 0.0, 0.0, True, True)

    bounds = realized_shell_bounds(m, outside, delta, l_cover)
    suffix = np.append(np.cumsum(bounds[::-1])[::-1], 0.0)

    exterior = count * psi * alpha_tail(m, delta, l_cover) if xi_cap > 0 else 0.0

    acceptable = np.flatnonzero(count * suffix + exterior <= eps)
    reached = len(acceptable) > 0
    level = int(acceptable[0]) if reached else l_cover

    if not reached:
        logger.print(f"Tolerance {eps:g} unreachable inside {w.window}, best bound {exterior:g}")
        logger.flush("certification_tolerance_missed", {"eps": eps, "exterior_bound": exterior, "level": level})

    expectation = count * psi * alpha_tail(m, delta, level) if psi > 0 else 0.0

    return CertifiedLocalEnergy(
        value=truncated_local_energy(m, w.config, delta, level),
        level=level,
        pathwise_bound=float(count * suffix[level]),
        exterior_bound=float(exterior),
        expectation_bound=float(expectation),
        exact=bool(suffix[level] == 0),
        reached=reached,
    )
