"""Numerical Iwasawa and Birkhoff decompositions of twisted loops.

Iwasawa splits ``C = F V_+`` with ``F`` unitary on the circle and ``V_+``
analytic, normalized by ``V_+(0) = diag(r, 1/r, 1)`` with ``r > 0``.  The
algorithm forms the positive loop ``Q = C^* C`` and computes its matrix
spectral factorization ``Q = V_+^* V_+``: a banded block-Toeplitz Cholesky
seed (Bauer's method) followed by Newton polish steps, then ``F = C V_+^{-1}``.

Birkhoff splits ``C = G_- G_+`` with ``G_-(infinity) = I`` by solving the
truncated block linear system that forces ``C G_+^{-1}`` to have vanishing
positive Fourier part; proximity to the small cells shows up as bad
conditioning of that system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky_banded, sqrtm

from .errors import NoConvergence, OutsideBigCell, SingularInput
from .loops import (
    CircleGrid,
    LoopMatrix,
    from_grid,
    invert_plus,
    multiply,
    spectral_degree,
    to_grid,
    unitarity_residual,
    wiener_norm,
)

#: condition number beyond which the Birkhoff system is treated as singular
BIG_CELL_COND_LIMIT = 1e12


@dataclass(frozen=True)
class IwasawaResult:
    """Unitary/plus splitting ``C = F V_+``."""

    unitary_part: LoopMatrix
    plus_part: LoopMatrix
    residual: float
    unitary_residual: float


@dataclass(frozen=True)
class BirkhoffResult:
    """Lower/upper splitting ``C = G_- G_+`` on the big cell."""

    minus_part: LoopMatrix
    plus_part: LoopMatrix
    in_big_cell: bool
    conditioning: float
    residual: float = 0.0


# -- spectral factorization ---------------------------------------------------


def _bauer_seed(q: LoopMatrix, blocks: int) -> LoopMatrix:
    """Analytic factor of ``Q = V^* V`` from banded block-Toeplitz Cholesky.

    Factors the reflected loop ``Qhat(lambda) = Q(1/lambda)`` as ``G G^H``
    using the stabilized last block row of the Cholesky factor, then returns
    ``V_j = G_j^H``.  The factor of a degree-b positive loop is polynomial of
    degree at most b (matrix Fejer-Riesz), so the band is exact.
    """
    bdeg = q.degree
    k = max(blocks, bdeg + 2)
    n = 3 * k
    bw = 3 * (bdeg + 1)
    ab = np.zeros((bw, n), dtype=complex)
    for nblk in range(0, bdeg + 1):
        qh = q.coeff(-nblk)  # Qhat_{nblk}
        for bi in range(3):
            for bj in range(3):
                r = 3 * nblk + bi - bj
                if 0 <= r < bw:
                    ab[r, bj : 3 * (k - nblk) : 3] = qh[bi, bj]
    try:
        chol = cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularInput(f"Toeplitz section not positive definite: {exc}") from exc
    ib = k - 1
    coeffs = {}
    for j in range(bdeg + 1):
        jb = k - 1 - j
        blk = np.zeros((3, 3), dtype=complex)
        for bi in range(3):
            for bj in range(3):
                r = (3 * ib + bi) - (3 * jb + bj)
                if 0 <= r < bw:
                    blk[bi, bj] = chol[r, 3 * jb + bj]
        coeffs[j] = blk.conj().T
    return LoopMatrix.from_terms(coeffs)


def _trim_plus_support(v: LoopMatrix, max_degree: int, floor: float = 1e-15) -> LoopMatrix:
    scale = max(v.max_abs(), 1e-300)
    top = 0
    for n in v.indices():
        if n >= 0 and np.abs(v.coeff(n)).max() > floor * scale:
            top = max(top, n)
    return v.truncate(min(max(top, 1), max_degree))


def _newton_polish(v_samples: np.ndarray, q_samples: np.ndarray, steps: int) -> np.ndarray:
    """Quadratically refine grid samples of the factor of ``Q = V^* V``.

    Each step applies ``V <- (I + E_+ + E_0 / 2) V`` with
    ``E = V^{-H} Q V^{-1} - I``; the analytic projection keeps V in the
    plus loop group.
    """
    m = v_samples.shape[0]
    eye = np.eye(3)
    for _ in range(steps):
        vinv = np.linalg.inv(v_samples)
        t = np.einsum("jba,jbc,jcd->jad", vinv.conj(), q_samples, vinv)
        err = np.abs(t - eye).max()
        if err < 1e-15:
            break
        spec = np.fft.fft(t - eye, axis=0) / m
        gspec = np.zeros_like(spec)
        gspec[0] = spec[0] / 2.0
        gspec[1 : m // 2] = spec[1 : m // 2]
        g = np.fft.ifft(gspec, axis=0) * m
        v_samples = np.einsum("jab,jbc->jac", eye + g, v_samples)
    return v_samples


def iwasawa(
    c: LoopMatrix,
    grid: CircleGrid,
    tol: float = 1e-10,
    out_degree: int | None = None,
    max_rounds: int = 4,
) -> IwasawaResult:
    """Iwasawa decomposition ``C = F V_+`` of an invertible twisted loop.

    Parameters
    ----------
    c : LoopMatrix
        Input loop; must be invertible at every grid point.
    grid : CircleGrid
        Circle sampling used for residual control; must resolve ``c``.
    tol : float
        Target for both the reconstruction and the unitarity residual.
    out_degree : int, optional
        Truncation degree of the returned unitary factor (its exact
        Fourier support is one-sided infinite).  Defaults to an adaptive
        choice from the grid spectrum.

    Raises
    ------
    SingularInput
        If ``C`` is numerically singular on the grid.
    NoConvergence
        If residuals fail to reach ``tol`` within the round budget.
    """
    m = grid.size
    cs = to_grid(c, grid)
    dets = np.linalg.det(cs)
    if np.abs(dets).min() < 1e-10:
        raise SingularInput(
            f"input loop singular on grid, min |det| = {np.abs(dets).min():.3e}"
        )
    q = multiply(c.conj_transpose(), c)
    qs = np.einsum("jba,jbc->jac", cs.conj(), cs)

    blocks = max(3 * (q.degree + 1), 24)
    best = None
    for _ in range(max_rounds):
        v = _bauer_seed(q, blocks)
        # the worst-case factor degree equals deg Q, but the coefficients
        # decay much earlier; trim so the grid can hold the factor
        v = _trim_plus_support(v, grid.max_degree)
        vs = _newton_polish(to_grid(v, grid), qs, steps=6)

        # constant unitary adjustment: make V_0 the hermitian-positive
        # polar factor, which is diag(r, 1/r, 1) for twisted input
        v0 = np.fft.fft(vs, axis=0)[0] / m
        s = sqrtm(v0.conj().T @ v0)
        k_adj = s @ np.linalg.inv(v0)
        vs = np.einsum("ab,jbc->jac", k_adj, vs)

        fs = np.einsum("jab,jbc->jac", cs, np.linalg.inv(vs))
        unit_res = unitarity_residual(fs)

        d_out = out_degree if out_degree is not None else max(
            spectral_degree(fs, rel_tol=1e-13), c.degree
        )
        d_out = min(d_out, grid.max_degree)
        f_loop = from_grid(fs, d_out, grid, alias_tol=None)
        v_loop = from_grid(vs, min(q.degree, grid.max_degree), grid, alias_tol=None)
        recon = wiener_norm(multiply(f_loop, v_loop) - c)
        best = IwasawaResult(f_loop, v_loop, float(recon), float(unit_res))
        if recon < tol and unit_res < tol:
            return best
        blocks *= 2
    raise NoConvergence(
        f"iwasawa residuals did not reach {tol:.1e} "
        f"(reconstruction {best.residual:.3e}, unitarity {best.unitary_residual:.3e})"
    )


# -- Birkhoff -----------------------------------------------------------------


def birkhoff(
    c: LoopMatrix,
    tol: float = 1e-10,
    sys_degree: int | None = None,
    max_rounds: int = 4,
) -> BirkhoffResult:
    """Birkhoff decomposition ``C = G_- G_+`` with ``G_-`` normalized at infinity.

    Solves for ``X = G_+^{-1}`` (analytic, truncated) from the block system
    ``(C X)_n = delta_{n,0} I`` for ``0 <= n <= sys_degree``, then reads off
    ``G_- = C X`` and inverts ``X``.  The truncation degree is doubled until
    the reconstruction residual drops below ``tol``; the decay rate of
    ``G_+^{-1}`` is set by how close det ``G_+`` vanishes to the circle,
    i.e. how close the input sits to the small cells.

    Raises
    ------
    OutsideBigCell
        When the truncated system has condition number above
        ``BIG_CELL_COND_LIMIT``; the conditioning is attached to the error.
    NoConvergence
        When escalation exhausts the budget without meeting ``tol``.
    """
    dc = c.degree
    msys = sys_degree if sys_degree is not None else max(2 * dc + 8, 16)
    best = None
    for _ in range(max_rounds):
        result = _birkhoff_once(c, msys, tol)
        if best is None or result.residual < best.residual:
            best = result
        if best.residual < tol:
            return best
        msys *= 2
    raise NoConvergence(
        f"birkhoff residual {best.residual:.3e} above {tol:.1e} after escalation"
    )


def _birkhoff_once(c: LoopMatrix, msys: int, tol: float) -> BirkhoffResult:
    dc = c.degree
    nblk = msys + 1
    a = np.zeros((3 * nblk, 3 * nblk), dtype=complex)
    for n in range(nblk):
        for mcol in range(max(0, n - dc), min(msys, n + dc) + 1):
            a[3 * n : 3 * n + 3, 3 * mcol : 3 * mcol + 3] = c.coeff(n - mcol)
    rhs = np.zeros((3 * nblk, 3), dtype=complex)
    rhs[0:3] = np.eye(3)

    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > BIG_CELL_COND_LIMIT:
        raise OutsideBigCell(
            f"Birkhoff system condition number {cond:.3e} exceeds "
            f"{BIG_CELL_COND_LIMIT:.1e}; input near the small cells",
            conditioning=cond,
        )
    xvec = np.linalg.solve(a, rhs)
    x = LoopMatrix.from_terms({n: xvec[3 * n : 3 * n + 3] for n in range(nblk)})

    g_minus_full = multiply(c, x)
    g_minus = LoopMatrix.from_terms(
        {n: g_minus_full.coeff(n) for n in range(-dc, 1)}
    )
    g_plus = invert_plus(x, msys)
    # exact factors of a polynomial product are polynomial of degree <= deg C
    g_plus = g_plus.truncate(max(dc, _plus_support(g_plus, tol)))
    residual = wiener_norm(multiply(g_minus, g_plus) - c)
    return BirkhoffResult(g_minus, g_plus, True, cond, float(residual))


def _plus_support(g: LoopMatrix, tol: float) -> int:
    d = 0
    for n in g.indices():
        if n > 0 and np.abs(g.coeff(n)).max() > tol:
            d = max(d, n)
    return d
