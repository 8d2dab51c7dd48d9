"""Spectral Galerkin discretization of the conformal Dirac operator on a spin torus.

Spinors are trivialized by the flat section with s0 (x) s0 = dz, so a spinor is a
pair of chi-quasiperiodic functions and the flat operator acts per plane wave
e^{2 pi i xi(x,y)}, xi in Gamma*_chi, through the 2x2 symbol

    [[0, 2 pi i xi(1,-i)], [-2 pi i xi(1,i), 0]],   eigenvalues +-2pi|xi|.

Conformal covariance turns D_{e^{2w}g} psi = lambda psi into the generalized
Hermitian pencil  A c = lambda M c  with M the (positive definite) matrix of
multiplication by e^w in the plane-wave basis; its entries are Fourier
coefficients of e^w at frequency differences.  The pencil is solved through
LAPACK's Cholesky-based reduction (scipy.linalg.eigh), eigenvectors come back
M-orthonormal, and the symmetric basis keeps the quaternionic pairing of the
continuum exactly, so multiplicities stay even and the trivial-character kernel
survives every conformal factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import (
    AliasingRisk,
    EmptyBasis,
    NotNormalized,
    SolverFailure,
)
from .lattice import DualVector, TorusGeometry, enumerate_shifted_dual
from .spectra import GROUPING_RTOL, SpectrumReport, report_from_eigenvalues


def _fft_size(n: int) -> int:
    return scipy.fft.next_fast_len(max(int(n), 8), real=False)


@dataclass(frozen=True)
class FourierField:
    """Real field on the torus, stored as coefficients on the integer dual lattice.

    field(x) = sum_{(m,n)} c_{mn} exp(2 pi i (m gamma1* + n gamma2*)(x)), with the
    Hermitian symmetry c_{-m,-n} = conj(c_{mn}) enforced at construction.  ``grid``
    is the default sampling resolution and must resolve twice the retained band.
    """

    geometry: TorusGeometry
    coefficients: dict = field(default_factory=dict)
    grid: tuple | None = None

    def __post_init__(self):
        sym = {}
        for (m, n), c in self.coefficients.items():
            key, neg = (int(m), int(n)), (-int(m), -int(n))
            c = complex(c)
            other = complex(self.coefficients.get(neg, np.conj(c)))
            if abs(np.conj(other) - c) > 1e-9 * max(1.0, abs(c)):
                raise ValueError(f"coefficients break Hermitian symmetry at {key}")
            sym[key] = 0.5 * (c + np.conj(other))
            sym[neg] = np.conj(sym[key])
        if (0, 0) in sym:
            sym[(0, 0)] = complex(sym[(0, 0)].real, 0.0)
        object.__setattr__(self, "coefficients", sym)
        bm, bn = self.band
        if self.grid is None:
            object.__setattr__(self, "grid", (_fft_size(4 * bm + 4), _fft_size(4 * bn + 4)))
        n1, n2 = self.grid
        if n1 < 2 * bm or n2 < 2 * bn:
            raise ValueError(f"grid {self.grid} under-resolves band ({bm}, {bn})")

    @property
    def band(self) -> tuple[int, int]:
        if not self.coefficients:
            return 0, 0
        return (max(abs(k[0]) for k in self.coefficients),
                max(abs(k[1]) for k in self.coefficients))

    def values(self, grid: tuple | None = None) -> np.ndarray:
        """Sample on the lattice-coordinate grid x = (k1/N1) gamma1 + (k2/N2) gamma2."""
        n1, n2 = grid or self.grid
        spec = np.zeros((n1, n2), dtype=complex)
        for (m, n), c in self.coefficients.items():
            spec[m % n1, n % n2] += c
        vals = np.fft.ifft2(spec) * (n1 * n2)
        return vals.real

    def mean(self) -> float:
        return complex(self.coefficients.get((0, 0), 0.0)).real

    def variance(self) -> float:
        """Mean square deviation from the mean, exactly sum_{k != 0} |c_k|^2."""
        return float(sum(abs(c) ** 2 for k, c in self.coefficients.items() if k != (0, 0)))

    def l2_norm(self) -> float:
        """L^2(dv_0) norm over the fundamental cell (area b)."""
        total = sum(abs(c) ** 2 for c in self.coefficients.values())
        return math.sqrt(self.geometry.lattice.b * float(total))

    def scaled(self, factor: float) -> "FourierField":
        return FourierField(self.geometry,
                            {k: factor * c for k, c in self.coefficients.items()}, self.grid)

    def plus(self, other: "FourierField") -> "FourierField":
        keys = set(self.coefficients) | set(other.coefficients)
        merged = {k: self.coefficients.get(k, 0.0) + other.coefficients.get(k, 0.0)
                  for k in keys}
        return FourierField(self.geometry, merged, None)

    def with_mean(self, new_mean: float) -> "FourierField":
        coeffs = dict(self.coefficients)
        coeffs[(0, 0)] = complex(new_mean, 0.0)
        return FourierField(self.geometry, coeffs, self.grid)

    @staticmethod
    def zero(geometry: TorusGeometry) -> "FourierField":
        return FourierField(geometry, {})

    @staticmethod
    def from_grid(geometry: TorusGeometry, values: np.ndarray, keys) -> "FourierField":
        """Project grid samples onto the given coefficient keys."""
        n1, n2 = values.shape
        spec = np.fft.fft2(values) / (n1 * n2)
        coeffs = {}
        for m, n in keys:
            coeffs[(m, n)] = complex(spec[m % n1, n % n2])
        return FourierField(geometry, coeffs)


@dataclass(frozen=True)
class SpinorCoefficients:
    """Eigenspinor in the plane-wave basis over Gamma*_chi (|xi| <= cutoff)."""

    basis: tuple
    plus_component: np.ndarray
    minus_component: np.ndarray
    eigenvalue: float
    geometry: TorusGeometry
    omega: FourierField | None = None

    def component_grids(self, grid: tuple) -> tuple[np.ndarray, np.ndarray]:
        """Sample (f_plus, f_minus-component) with the 1/sqrt(b) normalization."""
        return (_spinor_component_grid(self.geometry, self.basis, self.plus_component, grid),
                _spinor_component_grid(self.geometry, self.basis, self.minus_component, grid))


@dataclass(frozen=True)
class DiscreteDirac:
    """Stiffness/weight pair for the pencil A psi = lambda M psi."""

    A: np.ndarray
    M: np.ndarray | None
    basis: tuple
    cutoff: float
    geometry: TorusGeometry
    omega: FourierField | None = None


def assemble_flat_dirac(geometry: TorusGeometry, cutoff: float) -> DiscreteDirac:
    """Flat Dirac matrix: exact 2x2 blocks per xi, interleaved (xi, +/-) layout."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    basis = tuple(enumerate_shifted_dual(geometry, cutoff))
    if not basis:
        raise EmptyBasis(f"no dual vectors within cutoff {cutoff}")
    size = 2 * len(basis)
    A = np.zeros((size, size), dtype=complex)
    for i, xi in enumerate(basis):
        sym = 2.0j * math.pi * complex(xi.u, -xi.v)  # 2 pi i xi(1, -i)
        A[2 * i, 2 * i + 1] = sym
        A[2 * i + 1, 2 * i] = np.conj(sym)
    return DiscreteDirac(A, None, basis, cutoff, geometry)


def _weight_grid(basis, *fields) -> tuple[int, int]:
    ms = np.array([xi.index[0] for xi in basis])
    ns = np.array([xi.index[1] for xi in basis])
    dm, dn = ms.max() - ms.min(), ns.max() - ns.min()
    bm = max((f.band[0] for f in fields if f is not None), default=0)
    bn = max((f.band[1] for f in fields if f is not None), default=0)
    return _fft_size(2 * (dm + 2 * bm) + 8), _fft_size(2 * (dn + 2 * bn) + 8)


def _difference_matrix(basis, grid_values: np.ndarray) -> np.ndarray:
    """Matrix with entries = Fourier coefficients of the sampled field at
    frequency differences xi_i - xi_j (integer dual coordinates)."""
    n1, n2 = grid_values.shape
    spec = np.fft.fft2(grid_values) / (n1 * n2)
    ms = np.array([xi.index[0] for xi in basis])
    ns = np.array([xi.index[1] for xi in basis])
    dm = (ms[:, None] - ms[None, :]) % n1
    dn = (ns[:, None] - ns[None, :]) % n2
    W = spec[dm, dn]
    return 0.5 * (W + W.conj().T)


def weight_matrix(omega: FourierField, basis, exponent: float = 1.0,
                  grid: tuple | None = None) -> np.ndarray:
    """Matrix of multiplication by e^{exponent * omega} in the plane-wave basis.

    Entries are Fourier coefficients of e^{s w} at xi_i - xi_j, computed by
    sampling on an oversampled grid, exponentiating pointwise, and transforming
    back.  Exactly the identity (times e^{s c0}) for constant fields.
    """
    nontrivial = {k for k, c in omega.coefficients.items() if k != (0, 0) and abs(c) > 0}
    scale = math.exp(exponent * omega.mean())
    if not nontrivial:
        return scale * np.eye(len(basis), dtype=complex)
    need = _weight_grid(basis, omega)
    if grid is not None:
        if grid[0] < need[0] or grid[1] < need[1]:
            warnings.warn(f"grid {grid} marginal for weight assembly (want {need})",
                          AliasingRisk)
        need = (max(grid[0], need[0]), max(grid[1], need[1]))
    w = np.exp(exponent * omega.values(need))
    return _difference_matrix(basis, w)


def _expand_weight(W: np.ndarray) -> np.ndarray:
    """Apply a per-xi weight to both spinor components (interleaved layout)."""
    return np.kron(W, np.eye(2))


def kernel_tolerance(cutoff: float) -> float:
    return 1e-9 * (1.0 + 2.0 * math.pi * cutoff)


def solve_conformal(geometry: TorusGeometry, omega: FourierField | None, cutoff: float
                    ) -> tuple[SpectrumReport, list[SpinorCoefficients]]:
    """Solve A psi = lambda M psi for the metric e^{2 omega} g_{a,b}.

    Returns the grouped spectrum (area = b * mean of e^{2 omega}) and the
    M-orthonormal eigenspinors sorted by eigenvalue.
    """
    problem = assemble_flat_dirac(geometry, cutoff)
    basis = problem.basis
    b = geometry.lattice.b
    if omega is None:
        omega = FourierField.zero(geometry)
    trivial = all(k == (0, 0) or abs(c) == 0 for k, c in omega.coefficients.items())
    try:
        if trivial:
            scale = math.exp(omega.mean())
            vals, vecs = scipy.linalg.eigh(problem.A)
            vals = vals / scale
            vecs = vecs / math.sqrt(scale)
            area = b * math.exp(2.0 * omega.mean())
        else:
            W = weight_matrix(omega, basis, 1.0)
            M = _expand_weight(W)
            vals, vecs = scipy.linalg.eigh(problem.A, M)
            area = b * float(np.mean(np.exp(2.0 * omega.values(_weight_grid(basis, omega)))))
    except scipy.linalg.LinAlgError as exc:
        diag = {}
        if not trivial:
            diag["weight_condition"] = float(np.linalg.cond(W))
        raise SolverFailure(f"generalized eigensolver failed: {exc}", diag) from exc
    report = report_from_eigenvalues(vals, area, kernel_tolerance(cutoff))
    spinors = [SpinorCoefficients(basis, vecs[0::2, k].copy(), vecs[1::2, k].copy(),
                                  float(vals[k]), geometry, omega)
               for k in range(len(vals))]
    return report, spinors


def _spinor_component_grid(geometry, basis, coeffs, grid) -> np.ndarray:
    """Evaluate sum_i c_i e^{2 pi i xi_i(x)} / sqrt(b) on the lattice grid.

    The half-integer character shift factors out of the FFT as a fixed phase.
    """
    n1, n2 = grid
    spec = np.zeros((n1, n2), dtype=complex)
    for xi, c in zip(basis, coeffs):
        m, n = xi.index
        spec[m % n1, n % n2] += c
    vals = np.fft.ifft2(spec) * (n1 * n2)
    chi = geometry.character
    if not chi.is_trivial:
        s1 = np.arange(n1) / n1
        s2 = np.arange(n2) / n2
        phase = np.exp(1j * math.pi * (chi.chi1 * s1[:, None] + chi.chi2 * s2[None, :]))
        vals = vals * phase
    return vals / math.sqrt(geometry.lattice.b)


def spinor_density(spinor: SpinorCoefficients, omega: FourierField, grid: tuple) -> np.ndarray:
    """Pointwise |psi|^2_g dv_g / dv_0 = e^w (|f+|^2 + |f-|^2) on the grid."""
    fp, fm = spinor.component_grids(grid)
    return np.exp(omega.values(grid)) * (np.abs(fp) ** 2 + np.abs(fm) ** 2)


def _quadrature_grid(spinors, *fields) -> tuple[int, int]:
    basis = spinors[0].basis
    ms = [xi.index[0] for xi in basis]
    ns = [xi.index[1] for xi in basis]
    bm = max((f.band[0] for f in fields if f is not None), default=0)
    bn = max((f.band[1] for f in fields if f is not None), default=0)
    return (_fft_size(2 * (max(ms) - min(ms)) + 4 * bm + 8),
            _fft_size(2 * (max(ns) - min(ns)) + 4 * bn + 8))


def eigenvalue_derivative(geometry: TorusGeometry, omega: FourierField,
                          direction: FourierField, eigenpair: SpinorCoefficients) -> float:
    """Derivative -lambda int w' |psi|^2_g dv_g of an analytic eigenvalue branch.

    Evaluated by grid quadrature of the density e^w (|f+|^2 + |f-|^2) dv_0;
    the eigenpair must be M-normalized.
    """
    grid = _quadrature_grid([eigenpair], omega, direction)
    dens = spinor_density(eigenpair, omega, grid)
    b = geometry.lattice.b
    norm = float(np.mean(dens)) * b
    if abs(norm - 1.0) > 1e-8:
        raise NotNormalized(f"eigenpair has M-norm {norm}, expected 1")
    return -eigenpair.eigenvalue * float(np.mean(direction.values(grid) * dens)) * b


def perturbation_matrix(geometry: TorusGeometry, omega: FourierField,
                        direction: FourierField, spinors: list[SpinorCoefficients]
                        ) -> np.ndarray:
    """Eigenspace first-order matrix B_ij = -lambda <w' e^w psi_j, psi_i>.

    Its eigenvalues are the one-sided derivatives of the eigenvalue branches
    through a degenerate level; for a simple level it reduces to the scalar
    of eigenvalue_derivative.
    """
    lam = spinors[0].eigenvalue
    basis = spinors[0].basis
    grid = _weight_grid(basis, omega, direction)
    prod = direction.values(grid) * np.exp(omega.values(grid))
    P = _expand_weight(_difference_matrix(basis, prod))
    V = np.column_stack([np.ravel(np.column_stack([s.plus_component, s.minus_component]))
                         for s in spinors])
    return -lam * (V.conj().T @ P @ V)


def derivative_branches(geometry: TorusGeometry, omega: FourierField,
                        direction: FourierField, spinors: list[SpinorCoefficients]
                        ) -> np.ndarray:
    """Sorted one-sided derivative set of a (possibly degenerate) level."""
    B = perturbation_matrix(geometry, omega, direction, spinors)
    return np.sort(scipy.linalg.eigvalsh(B))


def eigenspace(spinors: list[SpinorCoefficients], eigenvalue: float,
               rtol: float = GROUPING_RTOL) -> list[SpinorCoefficients]:
    """All computed eigenpairs within relative ``rtol`` of ``eigenvalue``."""
    return [s for s in spinors
            if abs(s.eigenvalue - eigenvalue) <= rtol * max(1.0, abs(eigenvalue))]


def quaternionic_partner(spinor: SpinorCoefficients) -> SpinorCoefficients:
    """The paired eigenspinor (psi+, psi-) -> (conj psi-, -conj psi+).

    On coefficients this conjugates and reverses xi -> -xi; a norm-cutoff
    basis is symmetric under negation, so the partner then lives in the same
    discrete space (and the same eigenspace).  For a hand-built spinor whose
    basis is not symmetric, the partner is returned over the negated basis.
    """
    basis = spinor.basis
    lookup = {xi.index: i for i, xi in enumerate(basis)}
    try:
        pos = [lookup[(-xi.index[0], -xi.index[1])] for xi in basis]
    except KeyError:
        negated = tuple(DualVector(-xi.u, -xi.v, index=(-xi.index[0], -xi.index[1]))
                        for xi in basis)
        return SpinorCoefficients(negated, np.conj(spinor.minus_component),
                                  -np.conj(spinor.plus_component), spinor.eigenvalue,
                                  spinor.geometry, spinor.omega)
    plus = np.conj(spinor.minus_component[pos])
    minus = -np.conj(spinor.plus_component[pos])
    return SpinorCoefficients(basis, plus, minus, spinor.eigenvalue,
                              spinor.geometry, spinor.omega)


def flat_eigenspinor(geometry: TorusGeometry, xi: DualVector, sign: int = 1,
                     ) -> SpinorCoefficients:
    """Canonical plane-wave eigenspinor at xi with eigenvalue sign * 2pi|xi|."""
    if xi.norm == 0:
        raise ValueError("xi = 0 spans the kernel; no canonical positive eigenvector")
    lam = sign * 2.0 * math.pi * xi.norm
    cp = 1.0 / math.sqrt(2.0)
    cm = -1j * sign * complex(xi.u, xi.v) / xi.norm / math.sqrt(2.0)
    return SpinorCoefficients((xi,), np.array([cp]), np.array([cm]), lam,
                              geometry, FourierField.zero(geometry))
