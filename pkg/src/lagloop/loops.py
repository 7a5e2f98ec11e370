"""Truncated 3x3 matrix Laurent loops, twisting, and weighted Wiener norms.

Loops live on the unit circle ``S^1`` and are stored by their Fourier
coefficients ``M_n`` for ``n in [-d, d]``.  The order-six twisting
automorphism is

    sigma(xi) = -P xi^t P^{-1}          (Lie algebra),
    sigma(g)  =  P (g^t)^{-1} P^{-1}    (group),

with ``P = [[0, eps^2, 0], [eps^4, 0, 0], [0, 0, 1]]`` and
``eps = exp(i pi / 3)``.  A loop is twisted at the algebra level when its
coefficient at index ``n`` lies in the ``eps^n`` eigenspace of sigma; group
elements are twisted when ``sigma(g(eps^{-1} lambda)) = g(lambda)``.  The two
notions coincide only infinitesimally, so both checks are provided:
:func:`is_twisted` (coefficientwise, exact for truncated loops) and
:func:`group_twist_residual` (functional, for frames and factors).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AliasError, InvalidParams, TailLoss
from .weights import DEFAULT_WEIGHT, Weight

#: primitive 6th root of unity used by the twisting automorphism
EPS = np.exp(1j * np.pi / 3)

#: conjugating matrix of the outer involution; P is an involution (P^2 = I)
P_TWIST = np.array(
    [[0.0, EPS**2, 0.0], [EPS**4, 0.0, 0.0], [0.0, 0.0, 1.0]], dtype=complex
)


def sigma_algebra(xi: np.ndarray) -> np.ndarray:
    """Order-6 automorphism on sl(3, C): ``xi -> -P xi^t P^{-1}``."""
    return -P_TWIST @ np.swapaxes(xi, -1, -2) @ P_TWIST


def sigma_group(g: np.ndarray) -> np.ndarray:
    """Order-6 automorphism on SL(3, C): ``g -> P (g^t)^{-1} P^{-1}``."""
    return P_TWIST @ np.linalg.inv(np.swapaxes(g, -1, -2)) @ P_TWIST


def grade_project(mat: np.ndarray, grade: int) -> np.ndarray:
    """Project a 3x3 matrix onto the ``eps^grade`` eigenspace of sigma in sl(3).

    The trace is removed: within gl(3) the ``eps^3`` eigenspace also
    contains multiples of the identity, which do not belong to the graded
    Lie algebra.
    """
    acc = np.zeros((3, 3), dtype=complex)
    x = np.asarray(mat, dtype=complex)
    for j in range(6):
        acc += EPS ** (-(grade % 6) * j) * x
        x = sigma_algebra(x)
    acc /= 6.0
    return acc - (np.trace(acc) / 3.0) * np.eye(3)


@dataclass(frozen=True)
class CircleGrid:
    """Equispaced sampling ``lambda_j = exp(2 pi i j / m)`` of the circle.

    ``size`` must be a power of two; coefficient/grid conversion is exact
    for loops of degree ``d < size / 2``.
    """

    size: int = 256

    def __post_init__(self):
        m = self.size
        if m < 4 or (m & (m - 1)) != 0:
            raise InvalidParams(f"grid size must be a power of two >= 4, got {m}")

    @cached_property
    def points(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.size) / self.size)

    @cached_property
    def indices(self) -> np.ndarray:
        """Signed Fourier indices of the FFT bins, range (-m/2, m/2]."""
        m = self.size
        idx = np.arange(m)
        idx[idx > m // 2] -= m
        return idx

    @property
    def max_degree(self) -> int:
        return self.size // 2 - 1


@dataclass(frozen=True)
class LoopScalar:
    """Scalar Laurent polynomial ``sum a_n lambda^n``, ``n in [-d, d]``."""

    coeffs: np.ndarray  # shape (2d+1,), entry i holds a_{i-d}

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size % 2 != 1:
            raise InvalidParams("scalar loop needs an odd-length coefficient vector")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coeff(self, n: int) -> complex:
        d = self.degree
        return self.coeffs[n + d] if -d <= n <= d else 0.0 + 0.0j

    def __mul__(self, other: "LoopScalar") -> "LoopScalar":
        return LoopScalar(np.convolve(self.coeffs, other.coeffs))

    def evaluate(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        d = self.degree
        return sum(self.coeffs[n + d] * lam**n for n in range(-d, d + 1))

    @staticmethod
    def monomial(n: int, value=1.0) -> "LoopScalar":
        d = abs(n)
        c = np.zeros(2 * d + 1, dtype=complex)
        c[n + d] = value
        return LoopScalar(c)


class LoopMatrix:
    """3x3 matrix Laurent polynomial, the carrier for frames and potentials.

    Immutable; ``coeffs[i]`` is the 3x3 coefficient of ``lambda^(i - d)``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: np.ndarray):
        c = np.ascontiguousarray(np.asarray(coeffs, dtype=complex))
        if c.ndim != 3 or c.shape[1:] != (3, 3) or c.shape[0] % 2 != 1:
            raise InvalidParams(f"loop coefficients must have shape (2d+1, 3, 3), got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("LoopMatrix is immutable")

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self

    @property
    def degree(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def coeff(self, n: int) -> np.ndarray:
        d = self.degree
        if -d <= n <= d:
            return self.coeffs[n + d]
        return np.zeros((3, 3), dtype=complex)

    def indices(self):
        d = self.degree
        return range(-d, d + 1)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(degree: int = 0) -> "LoopMatrix":
        return LoopMatrix(np.zeros((2 * degree + 1, 3, 3), dtype=complex))

    @staticmethod
    def identity(degree: int = 0) -> "LoopMatrix":
        c = np.zeros((2 * degree + 1, 3, 3), dtype=complex)
        c[degree] = np.eye(3)
        return LoopMatrix(c)

    @staticmethod
    def from_terms(terms: dict[int, np.ndarray]) -> "LoopMatrix":
        """Build a loop from a sparse ``{index: 3x3 matrix}`` mapping."""
        if not terms:
            return LoopMatrix.zero(0)
        d = max(abs(int(n)) for n in terms)
        c = np.zeros((2 * d + 1, 3, 3), dtype=complex)
        for n, mat in terms.items():
            c[int(n) + d] += np.asarray(mat, dtype=complex)
        return LoopMatrix(c)

    @staticmethod
    def constant(mat: np.ndarray) -> "LoopMatrix":
        return LoopMatrix.from_terms({0: mat})

    # -- arithmetic --------------------------------------------------------

    def pad(self, degree: int) -> "LoopMatrix":
        d = self.degree
        if degree < d:
            raise InvalidParams("pad target degree smaller than current degree")
        if degree == d:
            return self
        c = np.zeros((2 * degree + 1, 3, 3), dtype=complex)
        c[degree - d : degree + d + 1] = self.coeffs
        return LoopMatrix(c)

    def __add__(self, other: "LoopMatrix") -> "LoopMatrix":
        d = max(self.degree, other.degree)
        return LoopMatrix(self.pad(d).coeffs + other.pad(d).coeffs)

    def __sub__(self, other: "LoopMatrix") -> "LoopMatrix":
        d = max(self.degree, other.degree)
        return LoopMatrix(self.pad(d).coeffs - other.pad(d).coeffs)

    def __neg__(self) -> "LoopMatrix":
        return LoopMatrix(-self.coeffs)

    def __mul__(self, scalar) -> "LoopMatrix":
        return LoopMatrix(self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "LoopMatrix") -> "LoopMatrix":
        return multiply(self, other)

    def conj_transpose(self) -> "LoopMatrix":
        """Pointwise adjoint on the circle: coefficients ``(M_n)^H`` at ``-n``."""
        c = np.conj(np.swapaxes(self.coeffs, 1, 2))[::-1]
        return LoopMatrix(c)

    def rotate_argument(self, phase: complex) -> "LoopMatrix":
        """Return the loop ``lambda -> self(phase^{-1} lambda)``."""
        d = self.degree
        factors = np.asarray(
            [phase ** (-n) for n in range(-d, d + 1)], dtype=complex
        )
        return LoopMatrix(self.coeffs * factors[:, None, None])

    def shift(self, k: int) -> "LoopMatrix":
        """Multiply by ``lambda^k`` (shift every Fourier index by ``k``)."""
        terms = {n + k: self.coeff(n) for n in self.indices()}
        return LoopMatrix.from_terms(terms)

    def truncate(self, degree: int, tail_tol: float | None = None) -> "LoopMatrix":
        """Drop coefficients beyond ``degree``.

        When ``tail_tol`` is given and the discarded mass (max column-sum of
        absolute coefficients) exceeds it, :class:`TailLoss` is raised.
        """
        d = self.degree
        if degree >= d:
            return self
        lost = 0.0
        for n in self.indices():
            if abs(n) > degree:
                lost = max(lost, float(np.abs(self.coeff(n)).sum()))
        if tail_tol is not None and lost > tail_tol:
            raise TailLoss(
                f"truncation to degree {degree} discards mass {lost:.3e} > {tail_tol:.3e}",
                lost=lost,
            )
        c = self.coeffs[d - degree : d + degree + 1]
        return LoopMatrix(c)

    def evaluate(self, lam) -> np.ndarray:
        """Evaluate at points ``lam`` (scalar or 1-d array) -> (..., 3, 3)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        d = self.degree
        powers = lam[:, None] ** np.arange(-d, d + 1)[None, :]
        return np.einsum("jn,nab->jab", powers, self.coeffs)

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def __repr__(self):
        return f"LoopMatrix(degree={self.degree})"


# -- norms ------------------------------------------------------------------


def wiener_norm(x, weight: Weight = DEFAULT_WEIGHT) -> float:
    """Weighted Wiener norm.

    Scalars: ``sum_n |a_n| w(n)``.  Matrices: the induced operator norm
    ``max_j sum_i ||T_ij||_w`` over columns, with entrywise scalar norms.
    """
    if isinstance(x, LoopScalar):
        d = x.degree
        w = weight(np.arange(-d, d + 1))
        return float(np.sum(np.abs(x.coeffs) * w))
    if isinstance(x, LoopMatrix):
        d = x.degree
        w = weight(np.arange(-d, d + 1))
        entry = np.tensordot(w, np.abs(x.coeffs), axes=(0, 0))  # (3, 3)
        return float(entry.sum(axis=0).max())
    raise InvalidParams(f"wiener_norm expects LoopScalar or LoopMatrix, got {type(x)}")


# -- multiplication ----------------------------------------------------------


def _next_pow2(n: int) -> int:
    m = 4
    while m < n:
        m *= 2
    return m


def multiply(
    a: LoopMatrix,
    b: LoopMatrix,
    max_degree: int | None = None,
    tail_tol: float | None = None,
) -> LoopMatrix:
    """Cauchy product of two loops, exact up to roundoff.

    The full product has degree ``a.degree + b.degree``; pass ``max_degree``
    to re-truncate (with :class:`TailLoss` raised when ``tail_tol`` is set
    and the discarded tail exceeds it).
    """
    dfull = a.degree + b.degree
    m = _next_pow2(2 * dfull + 2)
    ga = _to_samples(a, m)
    gb = _to_samples(b, m)
    prod = ga @ gb
    out = _coefficients_from_samples(prod, dfull)
    loop = LoopMatrix(out)
    if max_degree is not None and max_degree < dfull:
        loop = loop.truncate(max_degree, tail_tol=tail_tol)
    return loop


def _to_samples(a: LoopMatrix, m: int) -> np.ndarray:
    d = a.degree
    if m <= 2 * d:
        raise InvalidParams(f"grid size {m} too small for degree {d}")
    spec = np.zeros((m, 3, 3), dtype=complex)
    for n in a.indices():
        spec[n % m] += a.coeff(n)
    return np.fft.ifft(spec, axis=0) * m


def _coefficients_from_samples(samples: np.ndarray, d: int) -> np.ndarray:
    m = samples.shape[0]
    spec = np.fft.fft(samples, axis=0) / m
    out = np.empty((2 * d + 1, 3, 3), dtype=complex)
    for n in range(-d, d + 1):
        out[n + d] = spec[n % m]
    return out


# -- grid bridge --------------------------------------------------------------


def to_grid(a: LoopMatrix, grid: CircleGrid) -> np.ndarray:
    """Sample the loop at the grid points -> array of shape (m, 3, 3)."""
    if grid.size <= 2 * a.degree:
        raise InvalidParams(
            f"grid size {grid.size} cannot resolve degree {a.degree}"
        )
    return _to_samples(a, grid.size)


def from_grid(
    samples: np.ndarray,
    degree: int,
    grid: CircleGrid | None = None,
    alias_tol: float | None = 1e-10,
) -> LoopMatrix:
    """Recover Fourier coefficients from circle samples.

    Requires ``m > 2 * degree``.  When ``alias_tol`` is not None and the
    relative spectral mass outside the band exceeds it, raises
    :class:`AliasError`; pass ``alias_tol=None`` to truncate silently.
    """
    samples = np.asarray(samples, dtype=complex)
    m = samples.shape[0]
    if grid is not None and grid.size != m:
        raise InvalidParams("sample count does not match the grid size")
    if m <= 2 * degree:
        raise InvalidParams(f"need m > 2d, got m={m}, d={degree}")
    spec = np.fft.fft(samples, axis=0) / m
    if alias_tol is not None:
        band = np.abs(spec[np.r_[0 : degree + 1, m - degree : m]]).sum(axis=(1, 2)).max()
        tail_slice = np.abs(spec[degree + 1 : m - degree])
        tail = tail_slice.sum(axis=(1, 2)).max() if tail_slice.size else 0.0
        if tail > alias_tol * max(band, 1.0):
            raise AliasError(
                f"spectral mass {tail:.3e} beyond index {degree} "
                f"(relative tolerance {alias_tol:.1e})",
                tail_mass=tail,
            )
    out = np.empty((2 * degree + 1, 3, 3), dtype=complex)
    for n in range(-degree, degree + 1):
        out[n + degree] = spec[n % m]
    return LoopMatrix(out)


def spectral_degree(samples: np.ndarray, rel_tol: float = 1e-12) -> int:
    """Smallest degree whose out-of-band relative mass is below ``rel_tol``.

    Used to pick truncation degrees for loops that are analytic but not
    band-limited (matrix exponentials, resolvents).
    """
    samples = np.asarray(samples, dtype=complex)
    m = samples.shape[0]
    spec = np.abs(np.fft.fft(samples, axis=0) / m).sum(axis=(1, 2))
    scale = max(float(spec.max()), 1.0)
    half = m // 2
    for d in range(0, half):
        tail = spec[d + 1 : m - d]  # bins with |n| > d
        if tail.size == 0 or float(tail.max()) <= rel_tol * scale:
            return d
    return half - 1


# -- predicates ---------------------------------------------------------------


def twist_residual(a: LoopMatrix) -> float:
    """Max coefficient deviation from the algebra grading ``M_n in g_{n mod 6}``."""
    worst = 0.0
    for n in a.indices():
        mat = a.coeff(n)
        dev = sigma_algebra(mat) - EPS ** (n % 6) * mat
        worst = max(worst, float(np.abs(dev).max()))
    return worst


def is_twisted(a: LoopMatrix, tol: float = 1e-12) -> bool:
    """Coefficientwise grading check ``sigma(M_n) = eps^n M_n`` for all n."""
    return twist_residual(a) <= tol


def group_twist_residual(a: LoopMatrix, grid: CircleGrid) -> float:
    """Max grid deviation of ``sigma(g(eps^{-1} lambda)) - g(lambda)``.

    This is the loop-group twist condition; it is multiplicative, so it is
    the right check for frames, factors and monodromies.
    """
    rotated = a.rotate_argument(EPS)
    ga = to_grid(a, grid)
    gr = to_grid(rotated, grid)
    return float(np.abs(sigma_group(gr) - ga).max())


def is_group_twisted(a: LoopMatrix, grid: CircleGrid, tol: float = 1e-10) -> bool:
    return group_twist_residual(a, grid) <= tol


def unitarity_residual(samples: np.ndarray) -> float:
    """Max grid deviation of ``A^H A - I`` for grid samples (m, 3, 3)."""
    gram = np.einsum("jba,jbc->jac", np.conj(samples), samples)
    return float(np.abs(gram - np.eye(3)).max())


def check_unitary_on_circle(a: LoopMatrix, grid: CircleGrid, tol: float = 1e-10) -> bool:
    """True iff ``A(lambda_j)^H A(lambda_j) = I`` within ``tol`` at all grid points."""
    return unitarity_residual(to_grid(a, grid)) <= tol


# -- analytic-loop inverse ----------------------------------------------------


def invert_plus(v: LoopMatrix, degree: int) -> LoopMatrix:
    """Invert a loop with nonnegative Fourier support, to given output degree.

    The inverse is generally an infinite analytic series; coefficients are
    generated by the recursion ``B_0 = V_0^{-1}``,
    ``B_k = -V_0^{-1} sum_{j=1..k} V_j B_{k-j}``.
    """
    d = v.degree
    for n in range(-d, 0):
        if np.abs(v.coeff(n)).max() > 1e-13:
            raise InvalidParams("invert_plus expects nonnegative Fourier support")
    v0inv = np.linalg.inv(v.coeff(0))
    out = np.zeros((2 * degree + 1, 3, 3), dtype=complex)
    blocks = [v0inv]
    out[degree] = v0inv
    for k in range(1, degree + 1):
        acc = np.zeros((3, 3), dtype=complex)
        for j in range(1, min(k, d) + 1):
            acc += v.coeff(j) @ blocks[k - j]
        bk = -v0inv @ acc
        blocks.append(bk)
        out[degree + k] = bk
    return LoopMatrix(out)


# -- random twisted loops -----------------------------------------------------


def random_graded_loop(
    rng: np.random.Generator,
    degree: int,
    norm: float = 0.5,
    weight: Weight = DEFAULT_WEIGHT,
    reality: bool = False,
) -> LoopMatrix:
    """Random algebra-twisted loop scaled to the requested Wiener norm.

    With ``reality=True`` the loop lies in the real form (anti-hermitian on
    the circle), so its exponential is unitary.
    """
    d = degree
    c = np.zeros((2 * d + 1, 3, 3), dtype=complex)
    for n in range(0, d + 1):
        z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        z = grade_project(z, n % 6)
        if reality and n == 0:
            z = (z - z.conj().T) / 2.0
        c[d + n] = z
        if n > 0:
            if reality:
                c[d - n] = -z.conj().T
            else:
                z2 = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
                c[d - n] = grade_project(z2, (-n) % 6)
    loop = LoopMatrix(c)
    current = wiener_norm(loop, weight)
    if current == 0.0:
        return loop
    return loop * (norm / current)


def exp_loop(x: LoopMatrix, grid: CircleGrid, degree: int | None = None) -> LoopMatrix:
    """Matrix exponential of a loop, computed on the grid and re-expanded."""
    from scipy.linalg import expm

    xs = to_grid(x, grid)
    es = np.stack([expm(mat) for mat in xs])
    if degree is None:
        degree = spectral_degree(es, rel_tol=1e-14)
    return from_grid(es, degree, grid, alias_tol=None)
