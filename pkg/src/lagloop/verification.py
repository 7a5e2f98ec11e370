"""Numerical certification of the structural surface equations.

All geometric residuals are measured in the cylinder chart (``w`` with
``z = exp(i w)``), where the equivariant quantities are O(1):

* horizontality      ``f_w . conj(f) = 0`` (and the same for ``f_wbar``),
* conformality        ``f_w . conj(f_w) = exp(u)``, ``f_w . conj(f_wbar) = 0``,
* Gauss               ``u_wwbar + exp(u) - exp(-2u) |psi|^2 = 0``,
* Codazzi             ``dbar psi = 0``,

with the chart rules ``u_cyl = u_z + 2 ln |z|``, ``psi_cyl = (i z)^3 psi_z``
and ``f_w = i z f_z``.  Every check is a pure function of stored samples,
so the negative controls can tamper with copies and must push the
residual past its tolerance.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams
from .factorization import iwasawa
from .loops import CircleGrid, from_grid, multiply, spectral_degree, to_grid, wiener_norm
from .pipeline import FrameField, MonodromyReport, unitary_factor_continuation
from .potentials import PerturbedPotential
from .weights import DEFAULT_WEIGHT, Weight
from .zap import DEFAULT_KMAX, zap_solve

#: default residual tolerance for finite-difference (geometric) checks
GEO_TOL = 1e-4

#: default residual tolerance for algebraic identities
ALG_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    check: str
    residual: float
    tol: float
    passed: bool
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "residual": self.residual,
            "tol": self.tol,
            "pass": self.passed,
            "n_samples": self.n_samples,
        }


@dataclass
class VerificationReport:
    """Append-only, serializable record of check outcomes."""

    checks: list[CheckResult] = field(default_factory=list)
    asymptotic_pairs: list[tuple[float, float]] = field(default_factory=list)
    asymptotic_slope: float | None = None

    def add(self, check: str, residual: float, tol: float, n_samples: int) -> CheckResult:
        result = CheckResult(check, float(residual), float(tol), bool(residual < tol), n_samples)
        self.checks.append(result)
        return result

    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        out = {"checks": [c.as_dict() for c in self.checks]}
        if self.asymptotic_pairs:
            out["asymptotic"] = {
                "pairs": [[r, v] for r, v in self.asymptotic_pairs],
                "slope": self.asymptotic_slope,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


# -- per-sample cylinder-chart data --------------------------------------------


def _cyl_lift_derivatives(sample):
    """(f, f_w, f_wbar) from the stored cross of lift values."""
    h = sample.spacing
    fx = (sample.lift_cross[0] - sample.lift_cross[1]) / (2.0 * h)
    fy = (sample.lift_cross[2] - sample.lift_cross[3]) / (2.0 * h)
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    z = sample.z
    return sample.lift, 1j * z * fz, -1j * np.conj(z) * fzb


def _cyl_psi_cross(sample):
    z, h = sample.z, sample.spacing
    offs = np.array([h, -h, 1j * h, -1j * h])
    return np.array(
        [(1j * (z + o)) ** 3 * p for o, p in zip(offs, sample.psi_cross)]
    )


def _cyl_u_cross(sample):
    z, h = sample.z, sample.spacing
    offs = np.array([h, -h, 1j * h, -1j * h])
    return np.array(
        [u + 2.0 * np.log(abs(z + o)) for o, u in zip(offs, sample.u_cross)]
    )


def _herm(a, b):
    """Hermitian product ``a . conj(b)`` of 3-vectors."""
    return np.sum(a * np.conj(b))


def _require_geometry(field_: FrameField):
    if not field_.geometry_extracted():
        raise InvalidParams("geometry not extracted; call extract_geometry first")


# -- checks ----------------------------------------------------------------------


def check_horizontal(field_: FrameField) -> float:
    """Max of ``|f_w . conj(f)| + |f_wbar . conj(f)|`` over the samples."""
    _require_geometry(field_)
    worst = 0.0
    for s in field_.samples:
        f, fw, fwb = _cyl_lift_derivatives(s)
        worst = max(worst, abs(_herm(fw, f)) + abs(_herm(fwb, f)))
    return worst


def check_conformal(field_: FrameField) -> float:
    """Max deviation of the three conformality relations against ``exp(u)``."""
    _require_geometry(field_)
    worst = 0.0
    for s in field_.samples:
        _, fw, fwb = _cyl_lift_derivatives(s)
        eu = np.exp(s.u_cyl)
        worst = max(
            worst,
            abs(_herm(fw, fw) - eu),
            abs(_herm(fwb, fwb) - eu),
            abs(_herm(fw, fwb)),
        )
    return worst


def check_gauss_codazzi(field_: FrameField) -> tuple[float, float]:
    """Residuals of ``u_wwbar + e^u - e^{-2u} |psi|^2`` and ``dbar psi``."""
    _require_geometry(field_)
    gauss = 0.0
    codazzi = 0.0
    for s in field_.samples:
        h = s.spacing
        ucross = _cyl_u_cross(s)
        u0 = s.u_cyl
        # 5-point Laplacian in z, then u_wwbar = |dz/dw|^2 u_zzbar = |z|^2 lap/4
        lap = (ucross.sum() - 4.0 * u0) / h**2
        u_wwbar = abs(s.z) ** 2 * lap / 4.0
        psi0 = s.psi_cyl
        gauss = max(gauss, abs(u_wwbar + np.exp(u0) - np.exp(-2.0 * u0) * abs(psi0) ** 2))
        pcross = _cyl_psi_cross(s)
        px = (pcross[0] - pcross[1]) / (2.0 * h)
        py = (pcross[2] - pcross[3]) / (2.0 * h)
        dbar_z = 0.5 * (px + 1j * py)
        # w-chart antiholomorphic derivative: dbar_w = conj(dz/dw) dbar_z
        codazzi = max(codazzi, abs(np.conj(1j * s.z) * dbar_z))
    return gauss, codazzi


def check_closing(report: MonodromyReport, tol: float = ALG_TOL) -> bool:
    """True iff ``chi(1) = c I`` with ``c^3 = 1`` within ``tol``.

    ``c = 1`` closes the cylinder itself; a primitive cubic root closes its
    threefold cover (flagged on the report).
    """
    chi1 = report.chi_at_1
    c = complex(np.trace(chi1) / 3.0)
    if np.abs(chi1 - c * np.eye(3)).max() >= tol:
        return False
    if abs(abs(c) - 1.0) >= tol:
        return False
    return bool(abs(c**3 - 1.0) < tol)


# -- negative controls -------------------------------------------------------------


def _sample_copy(field_: FrameField) -> FrameField:
    """Copy with independent per-sample arrays; frames and evaluator shared."""
    samples = []
    for s in field_.samples:
        c = copy.copy(s)
        for name in ("lift", "lift_cross", "u_cross", "psi_cross"):
            value = getattr(s, name)
            if value is not None:
                setattr(c, name, np.array(value, copy=True))
        samples.append(c)
    return FrameField(
        samples=samples, evaluator=field_.evaluator,
        lam0=field_.lam0, shape=field_.shape,
    )


def control_phase_scramble(field_: FrameField, amplitude: float = 0.35) -> FrameField:
    """Multiply the lift by a nonconstant phase; horizontality must fail."""
    out = _sample_copy(field_)
    for s in out.samples:
        h = s.spacing
        offs = np.array([h, -h, 1j * h, -1j * h])
        s.lift = s.lift * np.exp(1j * amplitude * s.z.imag)
        for i, o in enumerate(offs):
            s.lift_cross[i] = s.lift_cross[i] * np.exp(1j * amplitude * (s.z + o).imag)
    return out


def control_anisotropic_stretch(field_: FrameField, factor: float = 1.05) -> FrameField:
    """Stretch the x-direction of the lift cross; conformality must fail."""
    out = _sample_copy(field_)
    for s in out.samples:
        for i in (0, 1):  # +h and -h entries
            s.lift_cross[i] = s.lift + factor * (s.lift_cross[i] - s.lift)
    return out


def control_metric_bump(field_: FrameField, bump: float = 0.1) -> FrameField:
    """Offset the metric exponent at the center; Gauss must fail."""
    out = _sample_copy(field_)
    for s in out.samples:
        s.u = s.u + bump
    return out


def control_antiholomorphic_psi(field_: FrameField, amplitude: float = 0.1) -> FrameField:
    """Add a conj(z)-type term to psi; Codazzi must fail."""
    out = _sample_copy(field_)
    for s in out.samples:
        h = s.spacing
        offs = np.array([h, -h, 1j * h, -1j * h])
        for i, o in enumerate(offs):
            s.psi_cross[i] = s.psi_cross[i] + amplitude * np.conj(o) / (1j * (s.z + o)) ** 3
    return out


# -- asymptotics --------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticResult:
    pairs: list[tuple[float, float]]  # (|z|, ||Phi - Psi||_w)
    slope: float
    ratios: list[float]               # ||Phi - Psi|| / |z|

    @property
    def ratio_spread(self) -> float:
        finite = [r for r in self.ratios if r > 0]
        return max(finite) / min(finite) if finite else np.inf


def check_asymptotic(
    pot: PerturbedPotential,
    radii,
    weight: Weight = DEFAULT_WEIGHT,
    k_max: int = DEFAULT_KMAX,
    fact_tol: float = 1e-10,
) -> AsymptoticResult:
    """Decay of ``||Phi - Psi||_w`` along radii, with a log-log slope fit.

    ``Phi`` and ``Psi`` are the unitary Iwasawa factors of ``H`` and of the
    pure exponential.  Both loops are ill-conditioned like ``r**(-spread)``;
    the implementation uses the regrouping
    ``H = Psi (W_+ P W_+^{-1}) W_+`` so that only the well-conditioned
    middle factor (the identity plus a decaying correction, conjugated in
    the eigenbasis of ``-i D``) is ever split directly.
    """
    radii = sorted({float(r) for r in radii}, reverse=True)
    if any(r <= 0 or r >= pot.radius for r in radii):
        raise InvalidParams("radii must lie inside the punctured disk")
    grid = pot.grid
    sol = zap_solve(pot, k_max=k_max)
    sd = sol.spectral
    psi_map = unitary_factor_continuation(sd, radii, grid)

    u = sd.vectors
    uh = np.conj(np.swapaxes(u, 1, 2))
    delta = sd.eigenvalues

    pairs = []
    ratios = []
    eye = np.eye(3)
    for r in radii:
        psi_loop = psi_map[r]
        psi_s = to_grid(psi_loop, grid)
        # middle factor M = Psi^{-1} e^L P e^{-L} Psi, with the conjugation
        # by e^L done entrywise in the eigenbasis (exact powers, no overflow;
        # P - I must never touch the identity or it underflows)
        p_eig = uh @ sol.evaluate_p_tail(r) @ u
        scale = np.exp(np.log(r) * (delta[:, :, None] - delta[:, None, :]))
        m_eig = eye + scale * p_eig
        basis = np.linalg.inv(psi_s) @ u
        m_s = basis @ m_eig @ np.conj(np.swapaxes(basis, 1, 2))
        deg = min(spectral_degree(m_s, rel_tol=1e-13), grid.max_degree)
        m_loop = from_grid(m_s, deg, grid, alias_tol=None)
        split = iwasawa(m_loop, grid, tol=fact_tol)
        phi_loop = multiply(psi_loop, split.unitary_part, max_degree=grid.max_degree)
        diff = wiener_norm(phi_loop - psi_loop, weight)
        pairs.append((r, float(diff)))
        ratios.append(float(diff) / r)

    logs = [(np.log(r), np.log(v)) for r, v in pairs if v > 0]
    slope = float(np.polyfit([x for x, _ in logs], [y for _, y in logs], 1)[0]) if len(logs) > 1 else np.nan
    return AsymptoticResult(pairs=pairs, slope=slope, ratios=ratios)


# -- assembled suite ----------------------------------------------------------------


def run_geometry_suite(
    field_: FrameField,
    report: VerificationReport | None = None,
    geo_tol: float = GEO_TOL,
) -> VerificationReport:
    """Horizontality, conformality, Gauss and Codazzi on one frame field."""
    report = report if report is not None else VerificationReport()
    n = len(field_.samples)
    report.add("horizontal", check_horizontal(field_), geo_tol, n)
    report.add("conformal", check_conformal(field_), geo_tol, n)
    gauss, codazzi = check_gauss_codazzi(field_)
    report.add("gauss", gauss, geo_tol, n)
    report.add("codazzi", codazzi, geo_tol, n)
    return report


def run_negative_controls(
    field_: FrameField,
    report: VerificationReport | None = None,
    geo_tol: float = GEO_TOL,
) -> VerificationReport:
    """Constructed violations must push each residual past tolerance."""
    report = report if report is not None else VerificationReport()
    n = len(field_.samples)
    controls = [
        ("control_horizontal_fails", check_horizontal(control_phase_scramble(field_))),
        ("control_conformal_fails", check_conformal(control_anisotropic_stretch(field_))),
        ("control_gauss_fails", check_gauss_codazzi(control_metric_bump(field_))[0]),
        ("control_codazzi_fails", check_gauss_codazzi(control_antiholomorphic_psi(field_))[1]),
    ]
    for name, residual in controls:
        # a control passes when the tampered residual EXCEEDS the tolerance
        result = CheckResult(name, float(residual), geo_tol, bool(residual > geo_tol), n)
        report.checks.append(result)
    return report
