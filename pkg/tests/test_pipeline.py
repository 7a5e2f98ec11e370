import numpy as np
import pytest

from lagloop.delaunay import DelaunaySpec
from lagloop.errors import BoundarySample, InvalidParams
from lagloop.loops import CircleGrid, LoopMatrix, group_twist_residual, to_grid, wiener_norm
from lagloop.pipeline import (
    annulus_grid,
    build_frames,
    delaunay_reference_frame,
    extract_geometry,
    monodromy,
)
from lagloop.potentials import PerturbedPotential
from lagloop.zap import zap_solve

from test_potentials import clifford_perturbed, CLIFFORD

GRID = CircleGrid(256)


@pytest.fixture(scope="module")
def clifford_field():
    pot = PerturbedPotential(spec=CLIFFORD, grid=GRID)
    zs = annulus_grid(0.4, 0.9, 3, 4)
    field = build_frames(pot, zs, k_max=6)
    return extract_geometry(field)


@pytest.fixture(scope="module")
def perturbed_field():
    pot = clifford_perturbed(k=4)
    zs = annulus_grid(0.35, 0.8, 3, 4)
    field = build_frames(pot, zs, k_max=16)
    return extract_geometry(field)


# -- frames ------------------------------------------------------------------


def test_annulus_grid_avoids_cut():
    zs = annulus_grid(0.5, 1.0, 4, 8)
    assert zs.shape == (4, 8)
    # no sample on the negative real axis
    assert np.abs(np.pi - np.abs(np.angle(zs))).min() > 0.1


def test_annulus_grid_validation():
    with pytest.raises(InvalidParams):
        annulus_grid(1.0, 0.5, 4, 4)


def test_frames_unitary_and_twisted(clifford_field):
    for s in clifford_field.samples:
        assert s.unitary_residual < 1e-8
        assert s.recon_residual < 1e-8
        assert group_twist_residual(s.frame, GRID) < 1e-10


def test_frame_determinant_one(clifford_field):
    for s in clifford_field.samples[:4]:
        dets = np.linalg.det(to_grid(s.frame, GRID))
        assert np.abs(dets - 1.0).max() < 1e-9


def test_vplus_identity_where_h_unitary():
    # pure Delaunay H = exp(ln z (-iD)) is unitary on |z| = 1
    pot = PerturbedPotential(spec=CLIFFORD, grid=GRID)
    field = build_frames(pot, [np.exp(0.3j)], k_max=6)
    ev = field.evaluator
    res = ev.frame(np.exp(0.3j))
    assert wiener_norm(res.plus_part - LoopMatrix.identity()) < 1e-9


# -- geometry -------------------------------------------------------------------


def test_clifford_cylinder_constants(clifford_field):
    # flat cylinder: u = 0 and psi = -1 in the w-chart (z = exp(i w))
    for s in clifford_field.samples:
        assert abs(s.u_cyl) < 1e-5
        assert abs(s.psi_cyl - (-1.0)) < 1e-5


def test_lift_normalized(clifford_field):
    for s in clifford_field.samples:
        assert abs(np.linalg.norm(s.lift) - 1.0) < 1e-8
        for v in s.lift_cross:
            assert abs(np.linalg.norm(v) - 1.0) < 1e-8


def test_perturbed_psi_holomorphic(perturbed_field):
    # dbar psi = 0, measured on the O(1) cylinder-chart coefficient
    for s in perturbed_field.samples:
        h = s.spacing
        offs = np.array([h, -h, 1j * h, -1j * h])
        psic = np.array([
            (1j * (s.z + o)) ** 3 * p for o, p in zip(offs, s.psi_cross)
        ])
        px = (psic[0] - psic[1]) / (2.0 * h)
        py = (psic[2] - psic[3]) / (2.0 * h)
        dbar = 0.5 * (px + 1j * py)
        assert abs(dbar) < 1e-4


def test_boundary_sample_error():
    pot = PerturbedPotential(spec=CLIFFORD, grid=GRID, radius=1.0)
    field = build_frames(pot, [0.9995], k_max=6)
    with pytest.raises(BoundarySample):
        extract_geometry(field)


# -- monodromy --------------------------------------------------------------------


def test_star_monodromy_closes():
    pot = clifford_perturbed(k=4)
    rep = monodromy(pot, basepoint=0.5, k_max=16)
    assert rep.deviation_from_exp_2pi_d < 1e-8
    assert np.abs(rep.chi_at_1 - np.eye(3)).max() < 1e-8
    assert rep.is_closed
    assert rep.closing_scalar == pytest.approx(1.0, abs=1e-8)
    assert not rep.cubic_root_flag
    assert rep.unitary_residual < 1e-8


def test_non_star_not_closed():
    pot = PerturbedPotential(spec=DelaunaySpec(a=1j, b=0.5j), grid=GRID)
    rep = monodromy(pot, basepoint=0.5, k_max=8)
    assert not rep.is_closed
    assert rep.closing_scalar is None


def test_monodromy_basepoint_independent_and_homomorphism():
    pot = clifford_perturbed(k=4)
    sol = zap_solve(pot, k_max=16)
    rep1 = monodromy(pot, basepoint=0.3, solution=sol)
    rep2 = monodromy(pot, basepoint=0.7, solution=sol)
    assert np.abs(rep1.chi - rep2.chi).max() < 1e-9
    # two turns compose: chi(r1) chi(r2) = chi(r1)^2 within the noise floor
    two_turns = rep1.chi @ rep2.chi
    assert np.abs(two_turns - rep1.chi @ rep1.chi).max() < 1e-7


def test_monodromy_validates_basepoint():
    pot = clifford_perturbed(k=4)
    with pytest.raises(InvalidParams):
        monodromy(pot, basepoint=-0.5)
    with pytest.raises(InvalidParams):
        monodromy(pot, basepoint=3.0)


# -- reference frame ---------------------------------------------------------------


def test_reference_frame_at_one_is_identity():
    res = delaunay_reference_frame(CLIFFORD, 1.0, GRID)
    assert wiener_norm(res.unitary_part - LoopMatrix.identity()) < 1e-9
    assert wiener_norm(res.plus_part - LoopMatrix.identity()) < 1e-9


def test_reference_frame_unitary_and_wplus():
    res = delaunay_reference_frame(CLIFFORD, 0.3, GRID)
    assert res.unitary_residual < 1e-9
    for n in res.plus_part.indices():
        if n < 0:
            assert np.abs(res.plus_part.coeff(n)).max() < 1e-10
