"""Generic path integration of the frame equation ``dC = C eta``.

The loop-valued unknown is carried as circle-grid samples, so each grid
point evolves as an independent 3x3 linear ODE along the path; classic
RK4 with step doubling controls the local error.
"""

from __future__ import annotations

import numpy as np

from .errors import PoleOnPath, StepUnderflow
from .loops import CircleGrid, LoopMatrix, from_grid, spectral_degree, to_grid
from .potentials import HolomorphicPotential

#: safety factor and exponent of the step controller (RK4 + doubling)
_SAFETY, _ORDER = 0.9, 5.0


def _segment_origin_distance(z0: complex, z1: complex) -> float:
    dz = z1 - z0
    seg = abs(dz)
    if seg == 0.0:
        return abs(z0)
    t = -np.real(np.conj(dz) * z0) / seg**2
    t = min(max(t, 0.0), 1.0)
    return abs(z0 + t * dz)


def integrate_ode(
    pot: HolomorphicPotential,
    path,
    init: LoopMatrix,
    grid: CircleGrid,
    local_tol: float = 1e-10,
    out_degree: int | None = None,
) -> LoopMatrix:
    """Integrate ``dC = C eta`` along a polyline and return C at the endpoint.

    Parameters
    ----------
    pot : HolomorphicPotential
        The potential; ``pot.value(z)`` is the coefficient of ``dz``.
    path : sequence of complex
        Polyline vertices; integration starts at ``path[0]`` with ``C = init``.
    init : LoopMatrix
        Initial value (normally twisted with unit determinant).
    local_tol : float
        Per-step error target, relative to the current solution scale.

    Raises
    ------
    PoleOnPath
        If a segment meets the puncture or leaves the disk of definition.
    StepUnderflow
        If step control collapses below the resolvable minimum.
    """
    path = [complex(z) for z in path]
    if len(path) < 2:
        return init
    for z0, z1 in zip(path[:-1], path[1:]):
        if pot.punctured and _segment_origin_distance(z0, z1) < 1e-9:
            raise PoleOnPath(f"segment {z0} -> {z1} passes through the puncture")
        if max(abs(z0), abs(z1)) > pot.radius:
            raise PoleOnPath(f"segment {z0} -> {z1} leaves the disk of definition")

    y = to_grid(init, grid)
    for z0, z1 in zip(path[:-1], path[1:]):
        y = _integrate_segment(pot, z0, z1, y, grid, local_tol)
    d_out = out_degree if out_degree is not None else spectral_degree(y, rel_tol=1e-13)
    return from_grid(y, min(d_out, grid.max_degree), grid, alias_tol=None)


def _rhs(pot, z, dz, grid):
    return to_grid(pot.value(z), grid) * dz


def _rk4_step(pot, z0, dz, y, grid):
    k1 = y @ _rhs(pot, z0, dz, grid)
    k2 = (y + 0.5 * k1) @ _rhs(pot, z0 + 0.5 * dz, dz, grid)
    k3 = (y + 0.5 * k2) @ _rhs(pot, z0 + 0.5 * dz, dz, grid)
    k4 = (y + k3) @ _rhs(pot, z0 + dz, dz, grid)
    return y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _integrate_segment(pot, z0, z1, y, grid, local_tol):
    length = abs(z1 - z0)
    if length == 0.0:
        return y
    direction = (z1 - z0) / length
    t, h = 0.0, min(length, length / 8.0 + 1e-16)
    hmin = length * 1e-13
    while t < length - 1e-15 * length:
        h = min(h, length - t)
        z = z0 + t * direction
        big = _rk4_step(pot, z, h * direction, y, grid)
        half = _rk4_step(pot, z, 0.5 * h * direction, y, grid)
        two = _rk4_step(pot, z + 0.5 * h * direction, 0.5 * h * direction, half, grid)
        scale = max(float(np.abs(two).max()), 1.0)
        err = float(np.abs(big - two).max()) / 15.0 / scale
        if err <= local_tol:
            # accept with local extrapolation (effectively 5th order)
            y = two + (two - big) / 15.0
            t += h
            growth = (local_tol / err) ** (1.0 / _ORDER) if err > 0 else 2.0
            h *= min(2.0, max(1.0, _SAFETY * growth))
        else:
            h *= max(0.1, _SAFETY * (local_tol / err) ** (1.0 / _ORDER))
        if h < hmin:
            raise StepUnderflow(
                f"step size collapsed to {h:.3e} on segment {z0} -> {z1}"
            )
    return y
