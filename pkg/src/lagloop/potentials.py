"""Perturbed Delaunay potentials and generic holomorphic potentials.

A perturbed Delaunay potential on the punctured disk is

    eta(z, lambda) = (-i D(lambda) / z) dz + ring_eta_+(z, lambda) dz,

with ``ring_eta_+ = sum_{k >= N} ring_eta_{+,k}(lambda) z^k`` twisted and
traceless, lowest lambda power ``>= -1``, and ``N`` beyond every integer
resonance of ``ad(-i D)``.  The star variant additionally has integer
spectrum of ``-i D(1)``, which closes the cylinder monodromy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .delaunay import (
    DelaunaySpec,
    delaunay_matrix,
    is_star_delaunay,
    resonance_bound,
    spectral_data,
)
from .errors import InvalidParams, PotentialSchemaError
from .loops import CircleGrid, LoopMatrix, is_twisted, twist_residual

#: default disk radius for perturbed potentials
DEFAULT_RADIUS = 2.0

#: absolute floor for the immersion (nonvanishing) test of the (1,3) entry
IMMERSION_TOL = 1e-9


def _validate_coefficient(k: int, loop: LoopMatrix, label: str):
    for n in loop.indices():
        if n < -1 and np.abs(loop.coeff(n)).max() > 1e-14:
            raise InvalidParams(
                f"{label}: lambda power {n} below -1 in coefficient k={k}"
            )
    if not is_twisted(loop, 1e-10):
        raise InvalidParams(
            f"{label}: coefficient k={k} not twisted "
            f"(residual {twist_residual(loop):.2e})"
        )
    for n in loop.indices():
        if abs(np.trace(loop.coeff(n))) > 1e-12:
            raise InvalidParams(f"{label}: coefficient k={k} not traceless")


@dataclass(frozen=True)
class PerturbedPotential:
    """Delaunay matrix plus a tail of perturbation coefficients.

    ``perturbation`` maps z-powers ``k >= resonance`` to twisted loops; an
    empty mapping gives the pure Delaunay (rotational) potential.
    """

    spec: DelaunaySpec
    perturbation: dict[int, LoopMatrix] = field(default_factory=dict)
    radius: float = DEFAULT_RADIUS
    grid: CircleGrid = field(default_factory=CircleGrid)

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParams("radius must be positive")
        n_bound = resonance_bound(self.spec, self.grid)
        object.__setattr__(self, "_resonance", n_bound)
        pert = {int(k): v for k, v in sorted(self.perturbation.items())}
        object.__setattr__(self, "perturbation", pert)
        for k, loop in pert.items():
            if k < n_bound:
                raise InvalidParams(
                    f"perturbation power k={k} below resonance bound N={n_bound}"
                )
            _validate_coefficient(k, loop, "perturbation")
        self._check_immersion()

    @property
    def resonance(self) -> int:
        """Resonance bound N of the Delaunay matrix on the working grid."""
        return self._resonance

    def is_star(self) -> bool:
        return is_star_delaunay(self.spec)

    def delaunay(self) -> LoopMatrix:
        return delaunay_matrix(self.spec)

    def spectral(self):
        return spectral_data(self.spec, self.grid)

    def perturbation_value(self, z: complex) -> LoopMatrix:
        """Evaluate ``ring_eta_+(z)`` as a loop (zero loop when unperturbed)."""
        acc = LoopMatrix.zero(1)
        for k, loop in self.perturbation.items():
            acc = acc + (z**k) * loop
        return acc

    def eta_value(self, z: complex) -> LoopMatrix:
        """Full potential coefficient ``-i D / z + ring_eta_+(z)``."""
        if z == 0:
            raise InvalidParams("potential has a pole at z = 0")
        return (-1j / z) * self.delaunay() + self.perturbation_value(z)

    def _check_immersion(self):
        """(1,3) entry of the lambda^{-1} part must not vanish off the origin.

        The entry is ``-i a / z + sum_k c_k z^k``; multiplying by z gives a
        polynomial whose roots inside the disk are exactly the violations,
        so the check is root-finding, not sampling.
        """
        kmax = max(self.perturbation.keys(), default=-1)
        poly = np.zeros(kmax + 2, dtype=complex)
        poly[0] = -1j * self.spec.a  # nonzero constant term
        for k, loop in self.perturbation.items():
            poly[k + 1] = loop.coeff(-1)[0, 2]
        if np.abs(poly[1:]).max(initial=0.0) == 0.0:
            return
        roots = np.roots(poly[::-1])
        inside = roots[np.abs(roots) < self.radius * (1.0 - IMMERSION_TOL)]
        if inside.size:
            worst = inside[np.argmin(np.abs(inside))]
            raise InvalidParams(
                "immersion condition violated: lambda^-1 (1,3) entry of the "
                f"potential vanishes at z = {worst:.6g} inside |z| < {self.radius}"
            )

    def as_holomorphic(self) -> "HolomorphicPotential":
        return HolomorphicPotential(
            value=self.eta_value, radius=self.radius, punctured=True
        )


@dataclass(frozen=True)
class HolomorphicPotential:
    """Generic potential ``eta = value(z) dz`` on a (punctured) disk."""

    value: Callable[[complex], LoopMatrix]
    radius: float = DEFAULT_RADIUS
    punctured: bool = False

    def validate_at(self, z: complex, tol: float = 1e-10):
        loop = self.value(z)
        for n in loop.indices():
            if n < -1 and np.abs(loop.coeff(n)).max() > tol:
                raise InvalidParams(f"potential has lambda power {n} < -1 at z={z}")
            if abs(np.trace(loop.coeff(n))) > 1e-9:
                raise InvalidParams(f"potential not traceless at z={z}")
        if not is_twisted(loop, 1e-9):
            raise InvalidParams(f"potential not twisted at z={z}")
        return loop

    @staticmethod
    def constant(loop: LoopMatrix, radius: float = np.inf) -> "HolomorphicPotential":
        return HolomorphicPotential(value=lambda z: loop, radius=radius)


def rotate_potential(pot: PerturbedPotential, s: float) -> PerturbedPotential:
    """Pull back under ``z -> exp(i s) z``: the Delaunay part is invariant,
    each ``z^k dz`` coefficient picks up ``exp(i s (k + 1))``."""
    rotated = {
        k: np.exp(1j * s * (k + 1)) * loop for k, loop in pot.perturbation.items()
    }
    return PerturbedPotential(
        spec=pot.spec, perturbation=rotated, radius=pot.radius, grid=pot.grid
    )


# -- JSON schema ----------------------------------------------------------------
#
# {
#   "a_im":  positive real (the value of -i a),
#   "b_re":  real, "b_im": real,
#   "perturbation": [
#     {"k": int, "coeffs": [
#        {"lambda_power": int >= -1, "matrix": 3x3 nested [re, im] pairs}
#     ]}
#   ]
# }


def _matrix_to_json(mat: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in mat]


def _matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape != (3, 3, 2):
        raise PotentialSchemaError(
            f"matrix must be 3x3 of [re, im] pairs, got shape {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def potential_to_dict(pot: PerturbedPotential) -> dict:
    pert = []
    for k, loop in pot.perturbation.items():
        coeffs = []
        for n in loop.indices():
            mat = loop.coeff(n)
            if np.abs(mat).max() > 0:
                coeffs.append({"lambda_power": int(n), "matrix": _matrix_to_json(mat)})
        pert.append({"k": int(k), "coeffs": coeffs})
    return {
        "a_im": float((-1j * pot.spec.a).real),
        "b_re": float(pot.spec.b.real),
        "b_im": float(pot.spec.b.imag),
        "perturbation": pert,
    }


def potential_from_dict(data: dict, radius: float = DEFAULT_RADIUS,
                        grid: CircleGrid | None = None) -> PerturbedPotential:
    try:
        a_im = float(data["a_im"])
        b = complex(float(data["b_re"]), float(data["b_im"]))
        entries = data.get("perturbation", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise PotentialSchemaError(f"malformed potential document: {exc}") from exc
    if a_im <= 0:
        raise PotentialSchemaError("a_im must be positive (it is the value of -i a)")
    perturbation = {}
    for entry in entries:
        try:
            k = int(entry["k"])
            coeffs = entry["coeffs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise PotentialSchemaError(f"malformed perturbation entry: {exc}") from exc
        terms = {}
        for item in coeffs:
            try:
                n = int(item["lambda_power"])
            except (KeyError, TypeError, ValueError) as exc:
                raise PotentialSchemaError(f"malformed coefficient: {exc}") from exc
            if n < -1:
                raise PotentialSchemaError(f"lambda_power {n} below -1")
            terms[n] = _matrix_from_json(item["matrix"])
        if k in perturbation:
            raise PotentialSchemaError(f"duplicate perturbation power k={k}")
        perturbation[k] = LoopMatrix.from_terms(terms)
    try:
        spec = DelaunaySpec(a=1j * a_im, b=b)
        return PerturbedPotential(
            spec=spec,
            perturbation=perturbation,
            radius=radius,
            grid=grid if grid is not None else CircleGrid(),
        )
    except InvalidParams as exc:
        raise PotentialSchemaError(str(exc)) from exc


def save_potential(pot: PerturbedPotential, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(potential_to_dict(pot), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_potential(path, radius: float = DEFAULT_RADIUS,
                   grid: CircleGrid | None = None) -> PerturbedPotential:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PotentialSchemaError(f"invalid JSON: {exc}") from exc
    return potential_from_dict(data, radius=radius, grid=grid)
