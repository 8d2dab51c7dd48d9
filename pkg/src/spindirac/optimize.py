"""Descent on the first normalized Dirac eigenvalue within a torus conformal class.

The derivative of an eigenvalue branch under omega(t) is
-lambda int w' |psi|^2_g dv_g, which extends to the normalized eigenvalue as

    d lambda_bar [w'] = lambda_bar * int w' (e^{2w}/Area - rho) dv_0,

with rho the M-normalized eigenspace density e^w (|f+|^2 + |f-|^2).  The
gradient field returned here averages rho over an M-orthonormal basis of the
lambda_1 eigenspace (quaternionic partners carry equal densities, so the
average coincides with the branch derivative whenever lambda_1 is
quaternionically simple) and is projected onto a fixed optimization band.
Descent is plain Armijo backtracking (initial step 0.1, factor 0.5,
sufficient decrease 1e-4) with the area pinned to b after every step by
recentring the zero mode -- lambda_bar is scale invariant, so recentring
never changes the objective, it only removes the flat direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import ZeroEigenvalue
from .lattice import TorusGeometry, validate_moduli
from .spectra import SpectrumReport
from .torus import (
    FourierField,
    SpinorCoefficients,
    _quadrature_grid,
    eigenspace,
    kernel_tolerance,
    solve_conformal,
    spinor_density,
)

ARMIJO_INITIAL_STEP = 0.1
ARMIJO_FACTOR = 0.5
ARMIJO_SUFFICIENT_DECREASE = 1e-4


def spin_structure_threshold(geometry: TorusGeometry) -> float:
    """b_S: flat-minimizer assertions hold for b > 2pi (trivial) or pi/2."""
    return 2.0 * math.pi if geometry.character.is_trivial else math.pi / 2.0


def default_band(omega0: FourierField, width: int = 2) -> tuple:
    """Optimization band: the initial field's keys plus the centered box."""
    keys = {(m, n) for m in range(-width, width + 1) for n in range(-width, width + 1)}
    keys |= set(omega0.coefficients)
    return tuple(sorted(keys))


def default_cutoff(geometry: TorusGeometry, omega0: FourierField,
                   band: tuple | None = None) -> float:
    """Smallest-|xi| shell plus one coupling reach of the optimization band.

    One shell beyond the band's frequency reach resolves lambda_1 to well
    below the 1e-4 acceptance scale for small conformal factors (couplings
    enter at second order); the margin absorbs boundary shells.
    """
    from .lattice import dual_basis
    g1, g2 = dual_basis(geometry.lattice)
    min_norm = min(g2.norm, g1.norm) * (0.5 if not geometry.character.is_trivial else 1.0)
    keys = band if band is not None else default_band(omega0)
    reach = max((abs(m) * g1.norm + abs(n) * g2.norm for m, n in keys), default=1.0)
    return max(1.2, min_norm + max(reach, 1.0) + 0.35)


def _first_positive_group(geometry, omega, cutoff):
    report, spinors = solve_conformal(geometry, omega, cutoff)
    ktol = 10.0 * kernel_tolerance(cutoff)
    positive = [s for s in spinors if s.eigenvalue > ktol]
    if not positive:
        raise ZeroEigenvalue("no positive eigenvalue above the kernel tolerance")
    lam1 = min(s.eigenvalue for s in positive)
    if lam1 <= ktol:
        raise ZeroEigenvalue(f"first positive eigenvalue {lam1} within kernel tolerance")
    return report, eigenspace(positive, lam1)


def lambda_bar_1(geometry: TorusGeometry, omega: FourierField | None,
                 cutoff: float) -> float:
    report, group = _first_positive_group(geometry, omega or FourierField.zero(geometry),
                                          cutoff)
    return group[0].eigenvalue * math.sqrt(report.area)


def _gradient_from_group(geometry, omega, area, group, band) -> FourierField:
    lam_bar = group[0].eigenvalue * math.sqrt(area)
    grid = _quadrature_grid(group, omega)
    dens = np.mean([spinor_density(s, omega, grid) for s in group], axis=0)
    g_vals = lam_bar * (np.exp(2.0 * omega.values(grid)) / area - dens)
    out = FourierField.from_grid(geometry, g_vals, band)
    return out.with_mean(0.0)


def gradient(geometry: TorusGeometry, omega: FourierField, cutoff: float | None = None,
             band: tuple | None = None) -> FourierField:
    """Riesz representer of d lambda_bar_1 in L^2(dv_0), as a mean-zero field.

    Density lambda_bar * (e^{2w}/Area - rho_avg), with rho_avg the averaged
    M-normalized eigenspace density, sampled on the anti-aliased grid and
    projected onto the optimization band.
    """
    if band is None:
        band = default_band(omega)
    if cutoff is None:
        cutoff = default_cutoff(geometry, omega, band)
    report, group = _first_positive_group(geometry, omega, cutoff)
    return _gradient_from_group(geometry, omega, report.area, group, band)


def _recenter_area(omega: FourierField) -> FourierField:
    """Shift the zero mode so that int e^{2w} dv_0 = b (area fixed to b)."""
    grid = omega.grid
    mean_e2w = float(np.mean(np.exp(2.0 * omega.values(grid))))
    return omega.with_mean(omega.mean() - 0.5 * math.log(mean_e2w))


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    lambda_bar_1: float
    area: float
    gradient_norm: float
    omega_variance: float


@dataclass
class OptState:
    """Descent trajectory; ``status`` is one of converged / step_limit /
    line_search_stall."""

    geometry: TorusGeometry
    omega: FourierField
    trace: list = field(default_factory=list)
    status: str = "running"
    exploratory: bool = False

    @property
    def final(self) -> TraceRow:
        return self.trace[-1]


def minimize(geometry: TorusGeometry, omega0: FourierField | None,
             max_steps: int = 200, tol: float = 1e-6,
             cutoff: float | None = None, band: tuple | None = None,
             initial_step: float = ARMIJO_INITIAL_STEP,
             armijo_factor: float = ARMIJO_FACTOR,
             sufficient_decrease: float = ARMIJO_SUFFICIENT_DECREASE,
             exploratory: bool = False) -> OptState:
    """Armijo gradient descent on lambda_bar_1 at fixed area.

    For assertion-grade runs the geometry must sit in its fundamental domain
    with b above the spin-structure threshold; pass ``exploratory=True`` to
    probe smaller b (results are then outside the flat-minimizer regime).
    """
    if omega0 is None:
        omega0 = FourierField.zero(geometry)
    ok, diag = validate_moduli(geometry)
    if not exploratory:
        if not ok:
            raise ValueError(f"geometry outside fundamental domain: {diag}")
        if geometry.lattice.b <= spin_structure_threshold(geometry):
            raise ValueError(
                f"b = {geometry.lattice.b} not above b_S = "
                f"{spin_structure_threshold(geometry)}; use exploratory=True")
    if band is None:
        band = default_band(omega0)
    if cutoff is None:
        cutoff = default_cutoff(geometry, omega0, band)

    state = OptState(geometry, _recenter_area(omega0), exploratory=exploratory)

    def evaluate(w):
        report, group = _first_positive_group(geometry, w, cutoff)
        return group[0].eigenvalue * math.sqrt(report.area), report.area, group

    value, area, group = evaluate(state.omega)
    for it in range(max_steps + 1):
        grad = _gradient_from_group(geometry, state.omega, area, group, band)
        gnorm = grad.l2_norm()
        state.trace.append(TraceRow(it, value, area, gnorm, state.omega.variance()))
        if gnorm < tol:
            state.status = "converged"
            return state
        if it == max_steps:
            break
        step = initial_step
        accepted = False
        while step > 1e-14:
            candidate = _recenter_area(state.omega.plus(grad.scaled(-step)))
            try:
                cand_value, cand_area, cand_group = evaluate(candidate)
            except ZeroEigenvalue:
                step *= armijo_factor
                continue
            if cand_value <= value - sufficient_decrease * step * gnorm ** 2:
                state.omega = candidate
                value, area, group = cand_value, cand_area, cand_group
                accepted = True
                break
            step *= armijo_factor
        if not accepted:
            state.status = "line_search_stall"
            return state
    state.status = "step_limit"
    return state


@dataclass(frozen=True)
class CriticalityReport:
    """Sup-norm distance of the best convex eigenspace density combination
    from a constant, with the minimizing coefficients."""

    residual: float
    coefficients: np.ndarray
    eigenvalue: float


def criticality_residual(geometry: TorusGeometry, omega: FourierField | None,
                         cutoff: float | None = None) -> CriticalityReport:
    """min over convex combos c of sup_x |Area * sum_j c_j |psi_j|^2_g - 1|.

    The lambda_1 eigenbasis is M-orthonormal (quaternionic partners included
    by construction); each density integrates to one against dv_g, so the
    residual is the linear program min t s.t. |Area * u(x_i) c - 1| <= t on
    the sampling grid, c in the simplex.
    """
    omega = omega or FourierField.zero(geometry)
    if cutoff is None:
        cutoff = default_cutoff(geometry, omega)
    report, group = _first_positive_group(geometry, omega, cutoff)
    grid = _quadrature_grid(group, omega)
    w_vals = omega.values(grid)
    # |psi|^2_g as a function: e^{-w} (|f+|^2 + |f-|^2) = e^{-2w} * density
    funcs = np.array([spinor_density(s, omega, grid).ravel() * np.exp(-2.0 * w_vals).ravel()
                      for s in group])
    n_pts = funcs.shape[1]
    if n_pts > 4096:
        stride = n_pts // 4096 + 1
        funcs = funcs[:, ::stride]
        n_pts = funcs.shape[1]
    k = len(group)
    # variables [c_1..c_k, t]
    scaled = report.area * funcs.T
    a_ub = np.block([[scaled, -np.ones((n_pts, 1))], [-scaled, -np.ones((n_pts, 1))]])
    b_ub = np.concatenate([np.ones(n_pts), -np.ones(n_pts)])
    a_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    res = scipy.optimize.linprog(
        c=np.concatenate([np.zeros(k), [1.0]]),
        A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
        bounds=[(0, None)] * k + [(0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"criticality LP failed: {res.message}")
    return CriticalityReport(float(res.x[-1]), res.x[:k].copy(), group[0].eigenvalue)
