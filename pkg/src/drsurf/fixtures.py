"""Ready-made complexes used by the tests, the CLI and the benchmarks."""
from __future__ import annotations

import math

import numpy as np

from .complex_core import DoubleComplex, build_double, connected_sum
from .critical_maps import square_torus


def tri_hex_params(angles=(1.0, 0.9)) -> tuple:
    """Critical ``(rho_-, rho_/, rho_\\)`` from two triangle angles ``(alpha_0, alpha_1)``."""
    a0, a1 = angles
    a2 = math.pi - a0 - a1
    return (1.0 / math.tan(a2), 1.0 / math.tan(a1), 1.0 / math.tan(a0))


def perturbed(dc: DoubleComplex, seed: int = 0, spread: float = 0.5) -> DoubleComplex:
    """Same cell structure with log-uniform random conformal parameters."""
    rng = np.random.default_rng(seed)
    rho = dc.rho * np.exp(rng.uniform(-spread, spread, size=dc.n_quads))
    keys = [[int(e) for e in row] for row in dc.sides]
    return build_double(dc.quads, rho, graph=dc.color, side_keys=keys)


def genus_two(seed: int = 0, spread: float = 0.5) -> DoubleComplex:
    """Non-critical genus-2 surface: two square tori glued along a removed quad."""
    a = square_torus(1, 2, 0.7).dc
    b = square_torus(2, 1, 0.9).dc
    return perturbed(connected_sum(a, b), seed=seed, spread=spread)


def noncritical_torus(seed: int = 0, spread: float = 0.5) -> DoubleComplex:
    return perturbed(square_torus(2, 2, math.pi / 4).dc, seed=seed, spread=spread)


def genus_three(seed: int = 0) -> DoubleComplex:
    two = connected_sum(square_torus(1, 2, 0.7).dc, square_torus(2, 1, 0.9).dc)
    return perturbed(connected_sum(two, square_torus(1, 1, 0.6).dc, qa=5), seed=seed)
