"""Delaunay matrices and their spectral analysis.

The Delaunay matrix

    D(lambda) = [[0,            -lambda conj(b),  a / lambda],
                 [b / lambda,    0,              -lambda conj(a)],
                 [-lambda conj(a),  a / lambda,   0]]

with ``a`` purely imaginary, ``-i a > 0`` and ``b != 0`` generates the
translationally equivariant minimal Lagrangian cylinders.  Its
characteristic polynomial is

    det(mu I - D(lambda)) = mu^3 + beta mu - 2 i Re(lambda^{-3} psi),

with ``beta = 2 |a|^2 + |b|^2`` and cubic-form constant ``psi`` determined
by ``b = i psi / a^2``.  On the circle ``-i D(lambda)`` is hermitian with
real eigenvalues summing to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParams
from .loops import CircleGrid, LoopMatrix

#: eigenvalue gap below which the spectrum is flagged as degenerate
DEGENERACY_GAP = 1e-8

#: absolute tolerance for the integer-spectrum (*-Delaunay) test
STAR_INT_TOL = 1e-9

#: denominator cap for rational eigenvalue-ratio detection
RATIO_DENOMINATOR_CAP = 10_000


@dataclass(frozen=True)
class DelaunaySpec:
    """Parameters ``(a, b)`` of a Delaunay matrix with derived constants."""

    a: complex
    b: complex

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if abs(a.real) > 1e-14 * max(1.0, abs(a)):
            raise InvalidParams(f"a must be purely imaginary, got {a}")
        if (-1j * a).real <= 0:
            raise InvalidParams(f"need -i a > 0, got a = {a}")
        if b == 0:
            raise InvalidParams("b must be nonzero (psi = 0 is the totally geodesic case)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def psi(self) -> complex:
        """Cubic-form constant, from ``b = i psi / a**2``."""
        return -1j * self.a**2 * self.b

    @property
    def beta(self) -> float:
        return 2.0 * abs(self.a) ** 2 + abs(self.b) ** 2

    @staticmethod
    def from_reals(a_im: float, b_re: float, b_im: float) -> "DelaunaySpec":
        return DelaunaySpec(a=1j * a_im, b=complex(b_re, b_im))


def delaunay_matrix(spec: DelaunaySpec) -> LoopMatrix:
    """Degree-1 twisted loop with the Delaunay entry pattern."""
    a, b = spec.a, spec.b
    low = np.array([[0, 0, a], [b, 0, 0], [0, a, 0]], dtype=complex)
    high = np.array(
        [[0, -np.conj(b), 0], [0, 0, -np.conj(a)], [-np.conj(a), 0, 0]],
        dtype=complex,
    )
    return LoopMatrix.from_terms({-1: low, 1: high})


def char_poly_check(spec: DelaunaySpec, grid: CircleGrid, tol: float = 1e-12) -> bool:
    """Verify ``det(mu I - D) = mu^3 + beta mu - 2i Re(lambda^{-3} psi)``.

    Compared coefficientwise at every grid point: the mu^2 coefficient
    (trace) must vanish, the mu coefficient must equal beta, and the
    constant term must match ``-2i Re(lambda^{-3} psi)``.
    """
    lam = grid.points
    d = delaunay_matrix(spec).evaluate(lam)
    trace = np.einsum("jii->j", d)
    # sum of principal 2x2 minors
    minors = (
        d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
        + d[:, 0, 0] * d[:, 2, 2] - d[:, 0, 2] * d[:, 2, 0]
        + d[:, 1, 1] * d[:, 2, 2] - d[:, 1, 2] * d[:, 2, 1]
    )
    dets = np.linalg.det(d)
    target_const = -2j * np.real(lam**-3 * spec.psi)
    err = max(
        float(np.abs(trace).max()),
        float(np.abs(minors - spec.beta).max()),
        float(np.abs(-dets - target_const).max()),
    )
    return err <= tol


@dataclass(frozen=True)
class SpectralData:
    """Per-grid eigendecomposition of the hermitian family ``-i D(lambda)``.

    ``eigenvalues[j]`` holds the descending real spectrum at ``lambda_j``;
    ``vectors[j]`` the orthonormal eigenvector columns in the same order.
    Projections ``L_j = v_j v_j^H`` satisfy ``sum_j L_j = I`` and
    ``-i D = sum_j delta_j L_j``.
    """

    grid: CircleGrid
    eigenvalues: np.ndarray  # (m, 3) real, descending
    vectors: np.ndarray      # (m, 3, 3) columns are eigenvectors
    degenerate: bool
    min_gap: float

    @property
    def max_spread(self) -> float:
        return float((self.eigenvalues[:, 0] - self.eigenvalues[:, 2]).max())

    def projections(self) -> np.ndarray:
        """Hermitian spectral projections, shape (m, 3, 3, 3): [j, k] = L_k."""
        v = self.vectors
        return np.einsum("jak,jbk->jkab", v, np.conj(v))

    def power_z(self, logz: complex) -> np.ndarray:
        """Grid samples of ``exp(logz * (-i D(lambda)))`` via the spectral split."""
        phases = np.exp(logz * self.eigenvalues)  # (m, 3)
        return np.einsum("jak,jk,jbk->jab", self.vectors, phases, np.conj(self.vectors))


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector phases: leading component real positive."""
    v = vectors.copy()
    m = v.shape[0]
    for k in range(3):
        col = v[:, :, k]
        mags = np.abs(col)
        lead = np.argmax(mags > 0.5 * mags.max(axis=1, keepdims=True), axis=1)
        ref = col[np.arange(m), lead]
        phase = np.where(np.abs(ref) > 0, ref / np.where(np.abs(ref) > 0, np.abs(ref), 1.0), 1.0)
        v[:, :, k] = col / phase[:, None]
    return v


def spectral_data(spec: DelaunaySpec, grid: CircleGrid) -> SpectralData:
    """Eigen-decompose ``-i D(lambda)`` at every grid point (descending order)."""
    dm = delaunay_matrix(spec)
    herm = -1j * dm.evaluate(grid.points)
    vals, vecs = np.linalg.eigh(herm)  # ascending
    vals = vals[:, ::-1]
    vecs = vecs[:, :, ::-1]
    vecs = _fix_phases(vecs)
    gaps = np.minimum(vals[:, 0] - vals[:, 1], vals[:, 1] - vals[:, 2])
    min_gap = float(gaps.min())
    return SpectralData(
        grid=grid,
        eigenvalues=vals,
        vectors=vecs,
        degenerate=min_gap < DEGENERACY_GAP,
        min_gap=min_gap,
    )


def resonance_bound(spec: DelaunaySpec, grid: CircleGrid) -> int:
    """Smallest N with ``j Id + ad(-i D)`` invertible for all integers j > N.

    The ad-operator has eigenvalues ``delta_p - delta_q``, so any integer
    above the maximal eigenvalue spread is safe; N = floor(max spread),
    clamped to at least 1.
    """
    sd = spectral_data(spec, grid)
    return max(1, int(np.floor(sd.max_spread + 1e-12)))


def is_star_delaunay(spec: DelaunaySpec, tol: float = STAR_INT_TOL) -> bool:
    """True iff every eigenvalue of ``-i D(lambda = 1)`` is an integer.

    The test is insensitive to the overall sign convention of the
    spectrum; the eigenvalues sum to zero either way.
    """
    vals = eigenvalues_at_one(spec)
    return bool(np.all(np.abs(vals - np.round(vals)) <= tol))


def eigenvalues_at_one(spec: DelaunaySpec) -> np.ndarray:
    """Descending real eigenvalues of ``-i D`` at ``lambda = 1``."""
    d1 = delaunay_matrix(spec).evaluate(np.array([1.0 + 0j]))[0]
    return np.linalg.eigvalsh(-1j * d1)[::-1]


def period_check(spec: DelaunaySpec, tol: float = STAR_INT_TOL):
    """Minimal translation period of the equivariant immersion, if any.

    Returns ``(p, (k1, k2, k3))`` with ``p * delta_j(1) = 2 pi k_j`` when
    ``delta_1(1) / delta_2(1)`` is rational (continued-fraction detection
    with denominator cap ``RATIO_DENOMINATOR_CAP``), else ``None``.
    """
    vals = eigenvalues_at_one(spec)
    d1 = float(vals[0])
    if abs(d1) < 1e-12:
        return None
    # second reference eigenvalue; skip a vanishing middle one (then using
    # delta_3 = -delta_1 still determines the period)
    d2 = float(vals[1]) if abs(vals[1]) > 1e-12 else float(vals[2])
    ratio = d1 / d2
    frac = Fraction(ratio).limit_denominator(RATIO_DENOMINATOR_CAP)
    if abs(ratio - float(frac)) > tol * max(1.0, abs(ratio)):
        return None
    l1 = frac.numerator  # coprime with the denominator by construction
    if l1 == 0:
        return None
    # p d1 = 2 pi l1 (and p d2 = 2 pi l2 follows); force p > 0
    p = 2.0 * np.pi * l1 / d1
    if p < 0:
        p = -p
    scaled = p * vals / (2.0 * np.pi)
    ks = np.round(scaled).astype(int)
    if np.abs(scaled - ks).max() > max(tol, 1e-9) * max(1.0, abs(p)):
        return None
    return float(p), (int(ks[0]), int(ks[1]), int(ks[2]))
