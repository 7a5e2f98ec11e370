import json

import numpy as np
import pytest

from lagloop.delaunay import DelaunaySpec
from lagloop.errors import InvalidParams, PotentialSchemaError
from lagloop.loops import CircleGrid, LoopMatrix, grade_project, wiener_norm
from lagloop.potentials import (
    HolomorphicPotential,
    PerturbedPotential,
    load_potential,
    potential_from_dict,
    potential_to_dict,
    rotate_potential,
    save_potential,
)

GRID = CircleGrid(256)
CLIFFORD = DelaunaySpec(a=1j, b=1j)


def g5_perturbation(ga=0.005, gb=0.005):
    mat = np.array([[0, 0, ga], [gb, 0, 0], [0, ga, 0]], dtype=complex)
    return LoopMatrix.from_terms({-1: mat})


def clifford_perturbed(k=4, ga=0.005, gb=0.005):
    return PerturbedPotential(
        spec=CLIFFORD, perturbation={k: g5_perturbation(ga, gb)}, grid=GRID
    )


def test_resonance_and_star():
    pot = clifford_perturbed()
    assert pot.resonance == 3
    assert pot.is_star()


def test_perturbation_below_resonance_rejected():
    with pytest.raises(InvalidParams):
        clifford_perturbed(k=2)


def test_untwisted_perturbation_rejected():
    bad = LoopMatrix.from_terms({-1: np.eye(3)})
    with pytest.raises(InvalidParams):
        PerturbedPotential(spec=CLIFFORD, perturbation={4: bad}, grid=GRID)


def test_lambda_power_below_minus_one_rejected():
    mat = grade_project(np.random.default_rng(0).normal(size=(3, 3)), 4)
    bad = LoopMatrix.from_terms({-2: mat})
    with pytest.raises(InvalidParams):
        PerturbedPotential(spec=CLIFFORD, perturbation={4: bad}, grid=GRID)


def test_immersion_condition_rejected():
    # a (1,3) lambda^-1 entry large enough to cancel -ia/z inside the disk
    with pytest.raises(InvalidParams):
        clifford_perturbed(k=4, ga=2.0, gb=0.0)


def test_eta_value_structure():
    pot = clifford_perturbed()
    z = 0.3 + 0.1j
    eta = pot.eta_value(z)
    expected_13 = (-1j * CLIFFORD.a) / z + 0.005 * z**4
    assert eta.coeff(-1)[0, 2] == pytest.approx(expected_13, rel=1e-13)


def test_pure_delaunay_potential_allows_non_star():
    pot = PerturbedPotential(spec=DelaunaySpec(a=1j, b=0.5j), grid=GRID)
    assert not pot.is_star()
    assert pot.perturbation == {}


# -- rotation -----------------------------------------------------------------


def test_rotate_identity_cases():
    pot = clifford_perturbed()
    for s in (0.0, 2.0 * np.pi):
        rot = rotate_potential(pot, s)
        for k in pot.perturbation:
            diff = rot.perturbation[k] - pot.perturbation[k]
            assert wiener_norm(diff) < 1e-12


def test_rotate_composition():
    pot = clifford_perturbed()
    s1, s2 = 0.7, -1.3
    once = rotate_potential(rotate_potential(pot, s1), s2)
    both = rotate_potential(pot, s1 + s2)
    for k in pot.perturbation:
        assert wiener_norm(once.perturbation[k] - both.perturbation[k]) < 1e-12


def test_rotate_phase_factor():
    pot = clifford_perturbed(k=4)
    s = 0.37
    rot = rotate_potential(pot, s)
    expected = np.exp(1j * s * 5.0)
    ratio = rot.perturbation[4].coeff(-1)[0, 2] / pot.perturbation[4].coeff(-1)[0, 2]
    assert ratio == pytest.approx(expected, rel=1e-13)


# -- holomorphic potential -------------------------------------------------------


def test_holomorphic_validation():
    pot = clifford_perturbed().as_holomorphic()
    loop = pot.validate_at(0.5 + 0.2j)
    assert loop.coeff(-1)[0, 2] != 0
    bad = HolomorphicPotential(
        value=lambda z: LoopMatrix.constant(np.eye(3)), radius=1.0
    )
    with pytest.raises(InvalidParams):
        bad.validate_at(0.1)


# -- JSON schema --------------------------------------------------------------------


def test_json_round_trip(tmp_path):
    pot = clifford_perturbed()
    path = tmp_path / "pot.json"
    save_potential(pot, path)
    back = load_potential(path, grid=GRID)
    assert back.spec.a == pot.spec.a
    assert back.spec.b == pot.spec.b
    for k in pot.perturbation:
        assert wiener_norm(back.perturbation[k] - pot.perturbation[k]) < 1e-15


def test_json_deterministic(tmp_path):
    pot = clifford_perturbed()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_potential(pot, p1)
    save_potential(pot, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_schema_validation_errors(tmp_path):
    with pytest.raises(PotentialSchemaError):
        potential_from_dict({"a_im": -1.0, "b_re": 0.0, "b_im": 1.0})
    with pytest.raises(PotentialSchemaError):
        potential_from_dict({"b_re": 0.0, "b_im": 1.0})
    with pytest.raises(PotentialSchemaError):
        potential_from_dict(
            {"a_im": 1.0, "b_re": 0.0, "b_im": 1.0,
             "perturbation": [{"k": 4, "coeffs": [
                 {"lambda_power": -2, "matrix": [[[0, 0]] * 3] * 3}]}]}
        )
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(PotentialSchemaError):
        load_potential(bad)


def test_schema_rejects_below_resonance():
    doc = potential_to_dict(clifford_perturbed(k=4))
    doc["perturbation"][0]["k"] = 1
    with pytest.raises(PotentialSchemaError):
        potential_from_dict(doc, grid=GRID)


def test_matrix_shape_checked():
    doc = {
        "a_im": 1.0, "b_re": 0.0, "b_im": 1.0,
        "perturbation": [{"k": 4, "coeffs": [{"lambda_power": -1, "matrix": [[0]]}]}],
    }
    with pytest.raises(PotentialSchemaError):
        potential_from_dict(doc)
