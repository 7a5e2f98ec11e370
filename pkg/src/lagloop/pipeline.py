"""Frames, surface geometry, and monodromy: the assembled loop-group method.

From a perturbed Delaunay potential the pipeline evaluates the closed-form
solution ``H``, Iwasawa-splits it into a unitary frame at every sample of
the punctured disk, and extracts the induced geometry: metric exponent
``u`` (``g = 2 e^u dz dzbar``), holomorphic cubic-form coefficient ``psi``,
and the horizontal lift (the frame's last column) whose projective class is
the minimal Lagrangian surface.

Conventions: the Maurer-Cartan coefficient of ``dz`` has the block form
``lambda^{-1} U_{-1} + U_0`` with ``U_{-1}`` carrying ``i exp(u/2)`` at
(1,3) and ``-i psi exp(-u)`` at (2,1) after a diagonal gauge rotation; the
Iwasawa normalization pins the gauge only up to that rotation, so ``u`` is
read from the modulus and ``psi`` from the phase-corrected (2,1) entry.
Cylinder-chart values (the ``w`` coordinate with ``z = exp(i w)``) are
provided alongside: ``u_cyl = u + 2 ln |z|`` and ``psi_cyl = (i z)^3 psi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .delaunay import DelaunaySpec, spectral_data
from .errors import BoundarySample, InvalidParams
from .factorization import IwasawaResult, iwasawa
from .loops import (
    CircleGrid,
    LoopMatrix,
    from_grid,
    multiply,
    spectral_degree,
    to_grid,
    wiener_norm,
)
from .potentials import PerturbedPotential
from .zap import DEFAULT_CUT_ANGLE, DEFAULT_KMAX, ZapSolution, cut_log, zap_solve

#: default relative finite-difference spacing for geometry extraction
FD_REL_SPACING = 1e-3

#: default closing tolerance for the monodromy scalar test
CLOSING_TOL = 1e-8


class FrameEvaluator:
    """Evaluates and caches Iwasawa frames of ``H(z)`` at arbitrary z."""

    def __init__(self, solution: ZapSolution, fact_tol: float = 1e-10,
                 alias_rel: float = 1e-12):
        self.solution = solution
        self.grid = solution.grid
        self.fact_tol = fact_tol
        self.alias_rel = alias_rel
        self._cache: dict[complex, IwasawaResult] = {}

    def h_loop(self, z: complex) -> LoopMatrix:
        samples = self.solution.evaluate(z)
        deg = spectral_degree(samples, rel_tol=self.alias_rel)
        return from_grid(samples, deg, self.grid, alias_tol=None)

    def frame(self, z: complex) -> IwasawaResult:
        z = complex(z)
        hit = self._cache.get(z)
        if hit is None:
            hit = iwasawa(self.h_loop(z), self.grid, tol=self.fact_tol)
            self._cache[z] = hit
        return hit

    def frame_samples(self, z: complex) -> np.ndarray:
        return to_grid(self.frame(z).unitary_part, self.grid)


@dataclass
class FrameSample:
    """Frame and extracted geometry at one z-sample."""

    z: complex
    frame: LoopMatrix
    v0_r: float
    recon_residual: float
    unitary_residual: float
    spacing: float | None = None
    lift: np.ndarray | None = None          # (3,) lift at lambda0
    lift_cross: np.ndarray | None = None    # (4, 3) at z+h, z-h, z+ih, z-ih
    u: float | None = None
    u_cross: np.ndarray | None = None       # (4,)
    psi: complex | None = None
    psi_cross: np.ndarray | None = None     # (4,)

    @property
    def u_cyl(self) -> float | None:
        if self.u is None:
            return None
        return self.u + 2.0 * np.log(abs(self.z))

    @property
    def psi_cyl(self) -> complex | None:
        if self.psi is None:
            return None
        return (1j * self.z) ** 3 * self.psi


@dataclass
class FrameField:
    """Sampled extended frames with extracted geometry."""

    samples: list[FrameSample]
    evaluator: FrameEvaluator = field(repr=False)
    lam0: complex = 1.0 + 0.0j
    shape: tuple[int, int] | None = None  # (n_radial, n_angular) when structured

    @property
    def zs(self) -> np.ndarray:
        return np.array([s.z for s in self.samples])

    def geometry_extracted(self) -> bool:
        return all(s.u is not None for s in self.samples)


def annulus_grid(r_min: float, r_max: float, n_radial: int, n_angular: int,
                 cut_angle: float = DEFAULT_CUT_ANGLE) -> np.ndarray:
    """Structured annular sample set avoiding the branch cut ray.

    Angular samples are offset by half a step from the cut angle, so no
    sample (nor a small finite-difference cross around it) touches the cut.
    """
    if not 0 < r_min < r_max:
        raise InvalidParams("need 0 < r_min < r_max")
    radii = np.linspace(r_min, r_max, n_radial)
    step = 2.0 * np.pi / n_angular
    angles = cut_angle + step * (np.arange(n_angular) + 0.5)
    return radii[:, None] * np.exp(1j * angles)[None, :]


def build_frames(
    pot: PerturbedPotential,
    zs,
    grid: CircleGrid | None = None,
    k_max: int = DEFAULT_KMAX,
    fact_tol: float = 1e-10,
    cut_angle: float = DEFAULT_CUT_ANGLE,
    solution: ZapSolution | None = None,
) -> FrameField:
    """Frames ``H = F V_+`` at every sample of ``zs`` (array or iterable).

    ``zs`` may be a structured 2-d array (radial x angular); the shape is
    retained for mesh export.
    """
    if grid is not None and grid.size != pot.grid.size:
        raise InvalidParams("grid must match the potential's working grid")
    zarr = np.asarray(list(np.ravel(zs)), dtype=complex)
    shape = np.shape(zs) if np.ndim(zs) == 2 else None
    sol = solution if solution is not None else zap_solve(pot, k_max=k_max, cut_angle=cut_angle)
    ev = FrameEvaluator(sol, fact_tol=fact_tol)

    def one(z):
        res = ev.frame(z)
        v0 = res.plus_part.coeff(0)
        return FrameSample(
            z=complex(z),
            frame=res.unitary_part,
            v0_r=float(v0[0, 0].real),
            recon_residual=res.residual,
            unitary_residual=res.unitary_residual,
        )

    samples = pmap(one, zarr)
    return FrameField(samples=samples, evaluator=ev, shape=shape)


# -- geometry extraction -------------------------------------------------------


def _alpha_minus_one(ev: FrameEvaluator, z: complex, h: float) -> np.ndarray:
    """lambda^{-1} Fourier block of ``F^{-1} dF/dz`` by centered differences."""
    m = ev.grid.size
    f0 = ev.frame_samples(z)
    fx = (ev.frame_samples(z + h) - ev.frame_samples(z - h)) / (2.0 * h)
    fy = (ev.frame_samples(z + 1j * h) - ev.frame_samples(z - 1j * h)) / (2.0 * h)
    fz = 0.5 * (fx - 1j * fy)
    alpha = np.linalg.inv(f0) @ fz
    spec = np.fft.fft(alpha, axis=0) / m
    return spec[m - 1]


def _geometry_at(ev: FrameEvaluator, z: complex, h: float):
    """(u, psi) from the gauge-corrected Maurer-Cartan block at one point."""
    a = _alpha_minus_one(ev, z, h)
    p_entry = a[0, 2]
    if abs(p_entry) == 0.0:
        raise InvalidParams(f"degenerate frame derivative at z={z}")
    u = 2.0 * float(np.log(np.abs(p_entry)))
    theta = float(np.angle(p_entry)) - 0.5 * np.pi
    psi = 1j * np.exp(2j * theta) * a[1, 0] * np.exp(u)
    return u, complex(psi)


def extract_geometry(
    field: FrameField,
    lam0: complex = 1.0 + 0.0j,
    rel_spacing: float = FD_REL_SPACING,
) -> FrameField:
    """Fill per-sample lift, metric exponent and cubic-form coefficient.

    Differentiation uses local centered crosses of fresh frames with
    spacing ``rel_spacing * |z|``; every needed point must stay inside the
    potential's punctured disk and off the branch cut.
    """
    ev = field.evaluator
    radius = ev.solution.potential.radius
    field.lam0 = complex(lam0)

    def lift_at(z):
        fr = ev.frame(z)
        return fr.unitary_part.evaluate(np.array([lam0]))[0][:, 2]

    def one(sample: FrameSample):
        z = sample.z
        h = rel_spacing * abs(z)
        if abs(z) + 2.5 * h >= radius or abs(z) - 2.5 * h <= 0.0:
            raise BoundarySample(
                f"finite-difference stencil around z={z} leaves the domain"
            )
        offs = np.array([h, -h, 1j * h, -1j * h])
        sample.spacing = h
        sample.lift = lift_at(z)
        sample.lift_cross = np.stack([lift_at(z + o) for o in offs])
        u0, psi0 = _geometry_at(ev, z, h)
        sample.u, sample.psi = u0, psi0
        cross = [_geometry_at(ev, z + o, h) for o in offs]
        sample.u_cross = np.array([c[0] for c in cross])
        sample.psi_cross = np.array([c[1] for c in cross])
        return sample

    pmap(one, field.samples)
    return field


# -- monodromy -------------------------------------------------------------------


@dataclass(frozen=True)
class MonodromyReport:
    """Monodromy of the frame around the puncture, with closing analysis."""

    chi: np.ndarray                 # grid samples (m, 3, 3)
    chi_at_1: np.ndarray            # 3x3 value at lambda = 1
    closing_scalar: complex | None
    is_closed: bool
    cubic_root_flag: bool
    unitary_residual: float
    glue_constancy: float           # drift of the chart-glue factors
    deviation_from_exp_2pi_d: float # Wiener-norm distance to exp(2 pi D)


def monodromy(
    pot: PerturbedPotential,
    basepoint: complex = 0.5,
    k_max: int = DEFAULT_KMAX,
    closing_tol: float = CLOSING_TOL,
    solution: ZapSolution | None = None,
) -> MonodromyReport:
    """Monodromy ``chi`` of ``H`` from analytic continuation around z = 0.

    The continuation glues evaluations on two charts (branch cuts along the
    negative and the positive real axis); the glue factors are measured at
    sample points of the overlapping half-annuli, and their constancy is
    reported.  The result is compared against ``exp(2 pi D(lambda))``.
    """
    z0 = complex(basepoint)
    if z0.imag != 0.0 or z0.real <= 0.0:
        raise InvalidParams("basepoint must be positive real, off both cuts")
    if abs(z0) >= pot.radius:
        raise InvalidParams("basepoint outside the disk of definition")
    sol = solution if solution is not None else zap_solve(pot, k_max=k_max)
    grid = pot.grid
    m = grid.size
    r = abs(z0)

    def ratio(theta):
        z = r * np.exp(1j * theta)
        h_a = sol.evaluate(z)
        h_b = _evaluate_with_cut(sol, z, cut_angle=0.0)
        return h_b @ np.linalg.inv(h_a)

    # upper overlap: the charts differ by the full turn factor
    b1_samples = [ratio(t) for t in (0.4 * np.pi, 0.5 * np.pi, 0.6 * np.pi)]
    # lower overlap: the charts agree; drift measures glue quality
    b2_samples = [ratio(t) for t in (1.4 * np.pi, 1.5 * np.pi, 1.6 * np.pi)]
    drift = max(
        float(np.abs(b1_samples[0] - b1_samples[-1]).max()),
        float(np.abs(b2_samples[0] - b2_samples[-1]).max()),
    )
    b1 = b1_samples[1]
    b2 = b2_samples[1]
    chi = np.linalg.inv(b1) @ b2

    spectral = sol.spectral
    expected = spectral.power_z(2j * np.pi)  # exp(2 pi D) = exp(2 pi i (-iD))
    deg = max(
        spectral_degree(chi, rel_tol=1e-13), spectral_degree(expected, rel_tol=1e-13)
    )
    deg = min(deg, grid.max_degree)
    chi_loop = from_grid(chi, deg, grid, alias_tol=None)
    exp_loop_ = from_grid(expected, deg, grid, alias_tol=None)
    deviation = wiener_norm(chi_loop - exp_loop_)

    gram = np.einsum("jba,jbc->jac", np.conj(chi), chi)
    unit_res = float(np.abs(gram - np.eye(3)).max())

    chi1 = chi[0]  # grid point 0 is lambda = 1
    c = complex(np.trace(chi1) / 3.0)
    scalar_dev = float(np.abs(chi1 - c * np.eye(3)).max())
    is_scalar = scalar_dev < closing_tol and abs(abs(c) - 1.0) < closing_tol
    cubic = abs(c**3 - 1.0) < closing_tol
    is_closed = bool(is_scalar and cubic)
    return MonodromyReport(
        chi=chi,
        chi_at_1=chi1,
        closing_scalar=c if is_scalar else None,
        is_closed=is_closed,
        cubic_root_flag=bool(is_closed and abs(c - 1.0) > closing_tol),
        unitary_residual=unit_res,
        glue_constancy=drift,
        deviation_from_exp_2pi_d=float(deviation),
    )


def _evaluate_with_cut(sol: ZapSolution, z: complex, cut_angle: float) -> np.ndarray:
    logz = cut_log(z, cut_angle)
    base = sol.spectral.power_z(logz)
    return np.einsum("jab,jbc->jac", base, sol.evaluate_p(z))


# -- Delaunay reference frame -----------------------------------------------------


def unitary_factor_continuation(
    spectral,
    radii,
    grid: CircleGrid,
    fact_tol: float = 1e-8,
    step_ratio: float = 0.5,
) -> dict[float, LoopMatrix]:
    """Iwasawa-unitary factors of ``exp(ln r (-i D))`` at the given radii.

    The loop has condition number ``r**(-spread)``, hopeless to factor
    directly at small r.  Since ``exp(ln r' (-iD)) = A exp(ln r (-iD))``
    with the moderate factor ``A = exp((ln r' - ln r)(-iD))``, and
    ``Iwasawa(A F_r) = (F_r', S)`` regroups the plus parts consistently,
    the unitary factor is continued multiplicatively from r = 1 in steps
    bounded by ``step_ratio``.
    """
    targets = sorted({float(r) for r in radii}, reverse=True)
    if any(r <= 0 for r in targets):
        raise InvalidParams("radii must be positive")
    out: dict[float, LoopMatrix] = {}
    up = [r for r in targets if r > 1.0]
    down = [r for r in targets if r <= 1.0]
    for branch in (sorted(up), down):
        f = LoopMatrix.identity()
        r_cur = 1.0
        for r_target in branch:
            if r_target == 1.0:
                out[1.0] = f
                continue
            while abs(np.log(r_target / r_cur)) > 1e-14:
                if r_target < r_cur:
                    r_next = max(r_target, r_cur * step_ratio)
                else:
                    r_next = min(r_target, r_cur / step_ratio)
                a = spectral.power_z(np.log(r_next / r_cur))
                deg = min(spectral_degree(a, rel_tol=1e-13), grid.max_degree)
                a_loop = from_grid(a, deg, grid, alias_tol=None)
                c = multiply(a_loop, f, max_degree=grid.max_degree)
                f = iwasawa(c, grid, tol=fact_tol).unitary_part
                # drop the inflated polynomial degree down to the measured
                # bandwidth (just above the factorization noise floor), or
                # the carried degree compounds per step
                fs = to_grid(f, grid)
                f_deg = min(spectral_degree(fs, rel_tol=1e-12) + 4, grid.max_degree)
                f = from_grid(fs, f_deg, grid, alias_tol=None)
                r_cur = r_next
            out[r_target] = f
    return out


def delaunay_reference_frame(
    spec: DelaunaySpec,
    z: complex,
    grid: CircleGrid,
    fact_tol: float = 1e-10,
    cut_angle: float = DEFAULT_CUT_ANGLE,
) -> IwasawaResult:
    """Unitary Iwasawa factor of ``exp(ln z (-i D))``, the comparison frame.

    Returns the full Iwasawa result: ``unitary_part`` is the frame ``Psi``
    and ``plus_part`` is ``W_+ = Psi^{-1} exp(ln z (-i D))`` with
    nonnegative Fourier support.  Radial ill-conditioning is handled by
    :func:`unitary_factor_continuation`; the angular part
    ``exp(i theta (-i D))`` is unitary and splits off exactly.
    """
    sd = spectral_data(spec, grid)
    logz = cut_log(z, cut_angle)
    r = float(np.exp(logz.real))
    f_radial = unitary_factor_continuation(sd, [r], grid, fact_tol=fact_tol)[r]
    rot = sd.power_z(1j * logz.imag)
    rot_deg = min(spectral_degree(rot, rel_tol=1e-13), grid.max_degree)
    rot_loop = from_grid(rot, rot_deg, grid, alias_tol=None)
    psi = multiply(rot_loop, f_radial, max_degree=grid.max_degree)

    base = sd.power_z(logz)
    psi_s = to_grid(psi, grid)
    w_plus = np.linalg.inv(psi_s) @ base
    w_deg = min(spectral_degree(w_plus, rel_tol=1e-12), grid.max_degree)
    w_loop = from_grid(w_plus, w_deg, grid, alias_tol=None)
    recon = float(np.abs(to_grid(psi, grid) @ to_grid(w_loop, grid) - base).max())
    unit = float(
        np.abs(np.einsum("jba,jbc->jac", np.conj(psi_s), psi_s) - np.eye(3)).max()
    )
    return IwasawaResult(psi, w_loop, recon, unit)
