import numpy as np
import pytest

from lagloop.delaunay import (
    DelaunaySpec,
    char_poly_check,
    delaunay_matrix,
    eigenvalues_at_one,
    is_star_delaunay,
    period_check,
    resonance_bound,
    spectral_data,
)
from lagloop.errors import InvalidParams
from lagloop.loops import CircleGrid, is_twisted, to_grid

GRID = CircleGrid(256)
CLIFFORD = DelaunaySpec(a=1j, b=1j)


def random_spec(rng):
    a_im = float(rng.uniform(0.2, 2.0))
    b = complex(rng.normal(), rng.normal())
    while abs(b) < 1e-3:
        b = complex(rng.normal(), rng.normal())
    return DelaunaySpec(a=1j * a_im, b=b)


def cubic_roots_of_reduced_poly(spec, lam):
    """Independent oracle: roots of nu^3 - beta nu + 2 Re(lambda^-3 psi)."""
    c0 = 2.0 * np.real(lam**-3 * spec.psi)
    return np.sort(np.roots([1.0, 0.0, -spec.beta, c0]).real)[::-1]


# -- spec validation ------------------------------------------------------------


def test_invalid_params():
    with pytest.raises(InvalidParams):
        DelaunaySpec(a=1j, b=0)
    with pytest.raises(InvalidParams):
        DelaunaySpec(a=1.0, b=1j)  # not purely imaginary
    with pytest.raises(InvalidParams):
        DelaunaySpec(a=-1j, b=1j)  # -ia < 0


def test_clifford_constants():
    assert CLIFFORD.beta == pytest.approx(3.0, abs=1e-12)
    assert CLIFFORD.psi == pytest.approx(-1.0, abs=1e-12)


# -- delaunay matrix -------------------------------------------------------------


def test_clifford_matrix_entries():
    dm = delaunay_matrix(CLIFFORD)
    i = 1j
    assert np.allclose(dm.coeff(-1), np.array([[0, 0, i], [i, 0, 0], [0, i, 0]]))
    assert np.allclose(dm.coeff(1), np.array([[0, i, 0], [0, 0, i], [i, 0, 0]]))
    assert np.abs(dm.coeff(0)).max() == 0.0


def test_matrix_twisted_and_skew_hermitian():
    rng = np.random.default_rng(2)
    for _ in range(10):
        spec = random_spec(rng)
        dm = delaunay_matrix(spec)
        assert is_twisted(dm, 1e-13)
        vals = to_grid(dm, GRID)
        assert np.abs(vals + np.conj(np.swapaxes(vals, 1, 2))).max() < 1e-13
        assert np.abs(np.einsum("jii->j", vals)).max() == 0.0


def test_b_zero_rejected():
    with pytest.raises(InvalidParams):
        delaunay_matrix(DelaunaySpec(a=1j, b=0.0))


# -- characteristic polynomial ----------------------------------------------------


def test_clifford_charpoly_values():
    # beta = 2|i|^2 + |i|^2 = 3; constant term at lambda=1 is -2i Re(-1) = +2i
    assert CLIFFORD.beta == pytest.approx(3.0)
    const = -2j * np.real(1.0 ** -3 * CLIFFORD.psi)
    assert const == pytest.approx(2j)


@pytest.mark.parametrize("seed", range(5))
def test_charpoly_identity_random(seed):
    rng = np.random.default_rng(300 + seed)
    assert char_poly_check(random_spec(rng), GRID, tol=1e-12)


def test_charpoly_matches_root_oracle():
    rng = np.random.default_rng(4)
    spec = random_spec(rng)
    sd = spectral_data(spec, GRID)
    for j in [0, 17, 100]:
        oracle = cubic_roots_of_reduced_poly(spec, GRID.points[j])
        assert np.abs(sd.eigenvalues[j] - oracle).max() < 1e-9


# -- spectral data -----------------------------------------------------------------


def test_clifford_spectrum_at_one():
    vals = eigenvalues_at_one(CLIFFORD)
    # computed spectrum of -iD(1) is {2, -1, -1}; the stated spectrum of
    # D(1) corresponds to {1, 1, -2}, so compare |eigenvalue| multisets
    assert np.allclose(np.sort(np.abs(vals)), [1.0, 1.0, 2.0], atol=1e-12)
    assert np.allclose(vals, [2.0, -1.0, -1.0], atol=1e-12)
    sd = spectral_data(CLIFFORD, GRID)
    assert sd.degenerate  # flat locus flagged


def test_eigenvalue_sum_zero():
    rng = np.random.default_rng(6)
    for _ in range(5):
        sd = spectral_data(random_spec(rng), GRID)
        assert np.abs(sd.eigenvalues.sum(axis=1)).max() < 1e-13


def test_clifford_max_spread():
    sd = spectral_data(CLIFFORD, GRID)
    # spread is maximal where Re(lambda^-3 psi) = 0, value 2 sqrt(3)
    assert sd.max_spread == pytest.approx(2.0 * np.sqrt(3.0), abs=1e-3)
    # sampled maximization of the cubic-root oracle on the same grid agrees
    oracle = max(
        np.ptp(cubic_roots_of_reduced_poly(CLIFFORD, lam)) for lam in GRID.points
    )
    assert sd.max_spread == pytest.approx(oracle, abs=1e-9)


def test_projections_resolve_identity():
    rng = np.random.default_rng(8)
    spec = random_spec(rng)
    sd = spectral_data(spec, GRID)
    proj = sd.projections()
    assert np.abs(proj.sum(axis=1) - np.eye(3)).max() < 1e-12
    # hermitian and idempotent where the spectrum is simple
    if not sd.degenerate:
        for k in range(3):
            pk = proj[:, k]
            assert np.abs(pk - np.conj(np.swapaxes(pk, 1, 2))).max() < 1e-12
            assert np.abs(np.einsum("jab,jbc->jac", pk, pk) - pk).max() < 1e-10
    # -iD = sum delta_k L_k
    dm = -1j * delaunay_matrix(spec).evaluate(GRID.points)
    recon = np.einsum("jk,jkab->jab", sd.eigenvalues, proj)
    assert np.abs(recon - dm).max() < 1e-12


# -- resonance bound ----------------------------------------------------------------


def test_clifford_resonance_bound():
    assert resonance_bound(CLIFFORD, GRID) == 3


def test_small_spread_minimum_bound():
    spec = DelaunaySpec(a=0.3j, b=0.1j)  # beta small => spread < 1
    sd = spectral_data(spec, GRID)
    assert sd.max_spread < 1.0
    assert resonance_bound(spec, GRID) == 1


def test_resonance_bound_post_verification():
    rng = np.random.default_rng(10)
    for _ in range(5):
        spec = random_spec(rng)
        n = resonance_bound(spec, GRID)
        sd = spectral_data(spec, GRID)
        diffs = sd.eigenvalues[:, :, None] - sd.eigenvalues[:, None, :]
        for j in range(n + 1, n + 11):
            assert np.abs(j - diffs).min() > 0.0


# -- star property -------------------------------------------------------------------


def test_clifford_is_star():
    assert is_star_delaunay(CLIFFORD)


def test_non_star_example():
    spec = DelaunaySpec(a=1j, b=0.5j)
    assert not is_star_delaunay(spec)
    # numeric cubic-root oracle on the reduced characteristic polynomial
    oracle = np.sort(cubic_roots_of_reduced_poly(spec, 1.0 + 0j))[::-1]
    vals = eigenvalues_at_one(spec)
    assert np.abs(vals - oracle).max() < 1e-9
    assert np.abs(vals - np.round(vals)).max() > 1e-3


def test_star_destroyed_by_perturbation():
    spec = DelaunaySpec(a=1j, b=1j * (1 + 1e-3))
    assert not is_star_delaunay(spec)


# -- periods ------------------------------------------------------------------------


def test_star_spec_period():
    out = period_check(CLIFFORD)
    assert out is not None
    p, ks = out
    assert p == pytest.approx(2.0 * np.pi, abs=1e-9)
    vals = eigenvalues_at_one(CLIFFORD)
    assert ks == tuple(int(round(v)) for v in vals)


def test_irrational_ratio_no_period():
    assert period_check(DelaunaySpec(a=1j, b=0.5j)) is None


def test_exp_2pi_d_is_identity_for_star():
    # closing consequence of integrality of the spectrum
    from scipy.linalg import expm

    d1 = delaunay_matrix(CLIFFORD).evaluate(np.array([1.0 + 0j]))[0]
    assert np.abs(expm(2.0 * np.pi * d1) - np.eye(3)).max() < 1e-9
