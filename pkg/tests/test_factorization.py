import numpy as np
import pytest

from lagloop.errors import OutsideBigCell, SingularInput
from lagloop.factorization import birkhoff, iwasawa
from lagloop.loops import (
    CircleGrid,
    LoopMatrix,
    exp_loop,
    grade_project,
    group_twist_residual,
    multiply,
    random_graded_loop,
    to_grid,
    unitarity_residual,
    wiener_norm,
)

GRID = CircleGrid(256)


def random_group_loop(rng, degree=4, norm=0.5):
    return exp_loop(random_graded_loop(rng, degree, norm=norm), GRID)


# -- iwasawa -------------------------------------------------------------------


def test_iwasawa_of_unitary_is_trivial():
    rng = np.random.default_rng(1)
    x = random_graded_loop(rng, 3, norm=0.5, reality=True)
    c = exp_loop(x, GRID)
    res = iwasawa(c, GRID)
    assert wiener_norm(res.unitary_part - c) < 1e-10
    assert wiener_norm(res.plus_part - LoopMatrix.identity()) < 1e-10


def test_iwasawa_constant_diagonal():
    c = LoopMatrix.constant(np.diag([2.0, 0.5, 1.0]))
    res = iwasawa(c, GRID)
    assert wiener_norm(res.unitary_part - LoopMatrix.identity()) < 1e-11
    assert wiener_norm(res.plus_part - c) < 1e-11


@pytest.mark.parametrize("seed", range(6))
def test_iwasawa_round_trip_random(seed):
    rng = np.random.default_rng(100 + seed)
    c = random_group_loop(rng)
    res = iwasawa(c, GRID)
    assert res.residual < 1e-10
    assert res.unitary_residual < 1e-10
    # V0 normalization diag(r, 1/r, 1), r > 0
    v0 = res.plus_part.coeff(0)
    off = v0 - np.diag(np.diag(v0))
    assert np.abs(off).max() < 1e-10
    r = v0[0, 0]
    assert abs(r.imag) < 1e-10 and r.real > 0
    assert abs(v0[0, 0] * v0[1, 1] - 1.0) < 1e-10
    assert abs(v0[2, 2] - 1.0) < 1e-10
    # factors twisted in the group sense
    assert group_twist_residual(res.unitary_part, GRID) < 1e-9
    assert group_twist_residual(res.plus_part, GRID) < 1e-9
    # plus part has no negative Fourier indices
    for n in res.plus_part.indices():
        if n < 0:
            assert np.abs(res.plus_part.coeff(n)).max() < 1e-12
    # determinants close to one on the grid
    for part in (res.unitary_part, res.plus_part):
        dets = np.linalg.det(to_grid(part, GRID))
        assert np.abs(dets - 1.0).max() < 1e-8


def test_iwasawa_idempotent():
    rng = np.random.default_rng(7)
    c = random_group_loop(rng)
    f = iwasawa(c, GRID).unitary_part
    again = iwasawa(f, GRID)
    assert wiener_norm(again.unitary_part - f) < 1e-8
    assert wiener_norm(again.plus_part - LoopMatrix.identity()) < 1e-8


def test_iwasawa_singular_input():
    c = LoopMatrix.constant(np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(SingularInput):
        iwasawa(c, GRID)


# -- birkhoff --------------------------------------------------------------------


def test_birkhoff_identity():
    res = birkhoff(LoopMatrix.identity())
    assert wiener_norm(res.minus_part - LoopMatrix.identity()) < 1e-12
    assert wiener_norm(res.plus_part - LoopMatrix.identity()) < 1e-12
    assert res.in_big_cell


def test_birkhoff_already_minus():
    m5 = grade_project(np.array([[0, 0, 1.0], [0.5, 0, 0], [0, 1.0, 0]]), 5)
    c = LoopMatrix.from_terms({0: np.eye(3), -1: 0.3 * m5})
    res = birkhoff(c)
    assert wiener_norm(res.minus_part - c) < 1e-10
    assert wiener_norm(res.plus_part - LoopMatrix.identity()) < 1e-10


def _random_birkhoff_pair(rng, degree=4, scale=0.1):
    # comfortably inside the big cell: factor recovery degrades (and should)
    # as det G_+ develops zeros near the circle
    gm_terms = {0: np.eye(3)}
    for n in range(1, degree + 1):
        gm_terms[-n] = scale * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) / n**2
    gp_terms = {0: np.eye(3) + scale * 0.5 * rng.normal(size=(3, 3))}
    for n in range(1, degree + 1):
        gp_terms[n] = scale * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) / n**2
    return LoopMatrix.from_terms(gm_terms), LoopMatrix.from_terms(gp_terms)


@pytest.mark.parametrize("seed", range(6))
def test_birkhoff_construct_then_split(seed):
    rng = np.random.default_rng(200 + seed)
    gm, gp = _random_birkhoff_pair(rng)
    c = multiply(gm, gp)
    res = birkhoff(c)
    assert res.in_big_cell
    assert wiener_norm(res.minus_part - gm) < 1e-9
    assert wiener_norm(res.plus_part - gp) < 1e-9
    recon = multiply(res.minus_part, res.plus_part)
    assert wiener_norm(recon - c) < 1e-9


def test_birkhoff_minus_normalization():
    rng = np.random.default_rng(9)
    gm, gp = _random_birkhoff_pair(rng)
    res = birkhoff(multiply(gm, gp))
    assert np.abs(res.minus_part.coeff(0) - np.eye(3)).max() < 1e-10
    for n in res.minus_part.indices():
        if n > 0:
            assert np.abs(res.minus_part.coeff(n)).max() < 1e-12
    for n in res.plus_part.indices():
        if n < 0:
            assert np.abs(res.plus_part.coeff(n)).max() < 1e-12


def test_birkhoff_outside_big_cell():
    # lambda^(+1) shift matrix is the classic non-big-cell element:
    # C = diag(lambda, lambda^{-1}, 1) twisted-compatible diagonal loop
    c = LoopMatrix.from_terms({
        1: np.diag([1.0, 0, 0]),
        -1: np.diag([0, 1.0, 0]),
        0: np.diag([0, 0, 1.0]),
    })
    with pytest.raises(OutsideBigCell) as err:
        birkhoff(c)
    assert err.value.conditioning is None or err.value.conditioning > 1e10
