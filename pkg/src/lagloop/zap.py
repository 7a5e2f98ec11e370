"""Closed-form solution ``H = exp(ln z (-i D)) P(z, lambda)`` of ``dH = H eta``.

For a perturbed Delaunay potential past all ad-resonances the ODE has a
solution with ``P`` holomorphic, ``P(0) = I`` and ``P_k = 0`` for
``1 <= k <= N``.  The coefficients are produced by the recursion

    (k Id - Dhat) q_k      = g_k(0),
    p_{k+1}                = p_k + z^{k+1} q_{k+1},
    g_{k+1}(z)             = (g_k(z) - g_k(0)) / z + q_k ring_eta_+(z),

seeded with ``g_0 = 0``, ``q_0 = I``, ``p_0 = I`` and the forced choice
``q_k = 0`` for ``1 <= k <= N``; here ``Dhat xi = [xi, -i D(lambda)]``.
All lambda dependence is kept in grid samples, since the resolvents
``(k Id - Dhat)^{-1}`` are analytic in an annulus but not band-limited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .delaunay import SpectralData
from .errors import InvalidParams, OnBranchCut, OutOfDomain, Resonant
from .loops import CircleGrid, LoopMatrix, from_grid, spectral_degree, to_grid, wiener_norm
from .potentials import PerturbedPotential

#: divisors below this threshold abort the ad-solve as resonant
RESONANCE_FLOOR = 1e-10

#: default branch cut: the ray at this angle (negative real axis)
DEFAULT_CUT_ANGLE = np.pi

#: default truncation order of the power series P
DEFAULT_KMAX = 24


def cut_log(z: complex, cut_angle: float = DEFAULT_CUT_ANGLE,
            angular_tol: float = 1e-12) -> complex:
    """Branch of ``log z`` with the cut along the ray at ``cut_angle``.

    The argument is taken in ``(cut_angle - 2 pi, cut_angle)``.
    """
    if z == 0:
        raise OutOfDomain("log undefined at z = 0")
    wrapped = np.angle(z * np.exp(-1j * (cut_angle - np.pi)))
    if np.pi - abs(wrapped) < angular_tol:
        raise OnBranchCut(f"z = {z} lies on the branch cut at angle {cut_angle}")
    return complex(np.log(abs(z)), wrapped + cut_angle - np.pi)


def ad_solve(k: int, rhs: np.ndarray, spectral: SpectralData) -> np.ndarray:
    """Solve ``k X - [X, -i D(lambda)] = rhs(lambda)`` on the grid.

    Solved entrywise in the eigenbasis of ``-i D``: the (p, q) entry picks
    up the divisor ``k - delta_q + delta_p``.  ``rhs`` and the result are
    grid sample arrays of shape (m, 3, 3).

    Raises
    ------
    Resonant
        If any divisor is below ``RESONANCE_FLOOR`` at some grid point.
    """
    u = spectral.vectors
    delta = spectral.eigenvalues
    divisors = k - delta[:, None, :] + delta[:, :, None]  # (m, p, q)
    bad = np.abs(divisors).min()
    if bad < RESONANCE_FLOOR:
        raise Resonant(
            f"divisor |k - delta_q + delta_p| = {bad:.3e} at k={k}; "
            "k below the resonance bound or spectral drift"
        )
    rhs_eig = np.einsum("jpa,jab,jbq->jpq", np.conj(np.swapaxes(u, 1, 2)), rhs, u)
    x_eig = rhs_eig / divisors
    return np.einsum("jap,jpq,jqb->jab", u, x_eig, np.conj(np.swapaxes(u, 1, 2)))


@dataclass(frozen=True)
class RecursionState:
    """Full record of the induction that builds ``P``.

    ``q`` and ``g_at_zero`` are grid sample arrays indexed by order;
    ``p_coeffs`` maps each retained order to the cumulative polynomial
    coefficient (equal to ``q_k``).  ``n_contraction`` is the integer
    certificate for the contraction bound of the underlying fixed-point
    argument, computed from operator norms induced by the Wiener norm and
    logged for reference (the recursion itself is explicit).
    """

    order: int
    resonance: int
    grid: CircleGrid
    q: list[np.ndarray] = field(repr=False)
    g_at_zero: list[np.ndarray] = field(repr=False)
    n_contraction: int

    def q_loop(self, k: int, rel_tol: float = 1e-12) -> LoopMatrix:
        """Coefficient form of ``q_k`` with adaptive truncation degree."""
        samples = self.q[k]
        deg = spectral_degree(samples, rel_tol=rel_tol)
        return from_grid(samples, deg, self.grid, alias_tol=None)

    def p_coeffs(self) -> dict[int, np.ndarray]:
        """Nonzero polynomial coefficients of ``p_n``, order -> samples."""
        out = {0: self.q[0]}
        for k in range(1, self.order + 1):
            if np.abs(self.q[k]).max() > 0.0:
                out[k] = self.q[k]
        return out


def _eta_ring_samples(pot: PerturbedPotential, grid: CircleGrid) -> dict[int, np.ndarray]:
    return {k: to_grid(loop, grid) for k, loop in pot.perturbation.items()}


def _contraction_order(pot: PerturbedPotential) -> int:
    """Smallest n with ``||Dhat|| / (n+1) + R ||Qhat|| / (n+2) < 1``.

    Upper bounds are used for the induced operator norms:
    ``||Dhat|| <= 2 ||D||_w`` and ``||Qhat|| <= sum_k ||eta_k||_w R^k``.
    """
    d_norm = 2.0 * wiener_norm(pot.delaunay())
    r = pot.radius
    q_norm = sum(wiener_norm(loop) * r**k for k, loop in pot.perturbation.items())
    n = pot.resonance + 1
    while d_norm / (n + 1) + r * q_norm / (n + 2) >= 1.0:
        n += 1
    return n


def run_recursion(pot: PerturbedPotential, k_max: int = DEFAULT_KMAX) -> RecursionState:
    """Run the order-by-order induction up to ``k_max``.

    Raises :class:`Resonant` if an ad-solve divisor degenerates (cannot
    happen when the resonance bound is honest).
    """
    n_res = pot.resonance
    if k_max <= n_res:
        raise InvalidParams(f"k_max={k_max} must exceed the resonance bound N={n_res}")
    grid = pot.grid
    m = grid.size
    spectral = pot.spectral()
    eta = _eta_ring_samples(pot, grid)
    kp = max(eta.keys(), default=-1)

    eye = np.broadcast_to(np.eye(3, dtype=complex), (m, 3, 3)).copy()
    zero = np.zeros((m, 3, 3), dtype=complex)

    # g is a polynomial in z with grid-sampled matrix coefficients; its
    # z-support stays within [0, max perturbation power]
    g = np.zeros((kp + 2, m, 3, 3), dtype=complex)
    q = [eye]
    g_at_zero = [zero.copy()]

    for k in range(0, k_max):
        # (D'): g_{k+1} = (g_k - g_k(0)) / z + q_k * eta_ring
        g_next = np.zeros_like(g)
        g_next[:-1] = g[1:]
        if np.abs(q[k]).max() > 0.0:
            for kk, sample in eta.items():
                g_next[kk] += np.einsum("jab,jbc->jac", q[k], sample)
        g = g_next
        g0 = g[0].copy()
        g_at_zero.append(g0)
        # (B'): resolve or force the next Taylor coefficient
        if k + 1 <= n_res:
            q.append(zero.copy())
        else:
            q.append(ad_solve(k + 1, g0, spectral))

    return RecursionState(
        order=k_max,
        resonance=n_res,
        grid=grid,
        q=q,
        g_at_zero=g_at_zero,
        n_contraction=_contraction_order(pot),
    )


@dataclass(frozen=True)
class ZapSolution:
    """Evaluatable closed-form solution ``H = exp(ln z (-i D)) P``."""

    potential: PerturbedPotential
    spectral: SpectralData
    p_orders: list[int]
    p_samples: np.ndarray  # (len(p_orders), m, 3, 3), excludes the identity
    k_max: int
    cut_angle: float = DEFAULT_CUT_ANGLE
    state: RecursionState | None = field(default=None, repr=False, compare=False)

    @property
    def grid(self) -> CircleGrid:
        return self.potential.grid

    def evaluate_p_tail(self, z: complex) -> np.ndarray:
        """Grid samples of ``P(z, lambda) - I = sum_k P_k z^k``.

        Kept separate from :meth:`evaluate_p` because the tail underflows
        against the identity in double precision for small z.
        """
        m = self.grid.size
        acc = np.zeros((m, 3, 3), dtype=complex)
        for i, k in enumerate(self.p_orders):
            acc += (z**k) * self.p_samples[i]
        return acc

    def evaluate_p(self, z: complex) -> np.ndarray:
        """Grid samples of ``P(z, lambda) = I + sum_k P_k z^k``."""
        return self.evaluate_p_tail(z) + np.eye(3)

    def evaluate(self, z: complex) -> np.ndarray:
        """Grid samples of ``H(z, lambda)``; z off the cut and inside the disk."""
        if abs(z) >= self.potential.radius:
            raise OutOfDomain(
                f"|z| = {abs(z):.4g} outside the disk of radius {self.potential.radius}"
            )
        logz = cut_log(z, self.cut_angle)
        base = self.spectral.power_z(logz)
        return np.einsum("jab,jbc->jac", base, self.evaluate_p(z))

    def p_loop(self, k: int, rel_tol: float = 1e-12) -> LoopMatrix:
        """Coefficient form of ``P_k`` (zero loop for forced orders)."""
        if k in self.p_orders:
            samples = self.p_samples[self.p_orders.index(k)]
            deg = spectral_degree(samples, rel_tol=rel_tol)
            return from_grid(samples, deg, self.grid, alias_tol=None)
        return LoopMatrix.zero(0)

    def tail_estimate(self, z: complex) -> float:
        """Crude bound ``||P_kmax|| |z|^kmax / (1 - |z| / R)`` on the truncation."""
        if not self.p_orders:
            return 0.0
        last = float(np.abs(self.p_samples[-1]).max())
        r = abs(z) / self.potential.radius
        return last * abs(z) ** self.k_max / max(1.0 - r, 1e-12)


def zap_solve(pot: PerturbedPotential, k_max: int = DEFAULT_KMAX,
              cut_angle: float = DEFAULT_CUT_ANGLE) -> ZapSolution:
    """Build the ZAP solution for a perturbed Delaunay potential.

    The power series ``P`` is truncated at ``k_max``; ``P_k = q_k`` from the
    recursion, with the forced zone ``P_k = 0`` for ``1 <= k <= N`` exact by
    construction.
    """
    state = run_recursion(pot, k_max=k_max)
    orders, samples = [], []
    for k in range(state.resonance + 1, k_max + 1):
        if np.abs(state.q[k]).max() > 0.0:
            orders.append(k)
            samples.append(state.q[k])
    stack = (
        np.stack(samples)
        if samples
        else np.zeros((0, pot.grid.size, 3, 3), dtype=complex)
    )
    return ZapSolution(
        potential=pot,
        spectral=pot.spectral(),
        p_orders=orders,
        p_samples=stack,
        k_max=k_max,
        cut_angle=cut_angle,
        state=state,
    )
