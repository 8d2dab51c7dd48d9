"""Maps to complex projective space: lifts, energies, degree, harmonicity.

A map Psi: M -> CP^n is handled through a nonvanishing lift F into C^{n+1}
together with exact z / zbar derivatives.  Two backends feed the same
sample-based operations: closed-form polynomial lifts in (z, zbar) on the
sphere (two stereographic charts, disk quadrature on each; the charts tile
the sphere exactly along |z| = 1), and grid lifts on the torus built from
eigenspinor coefficients (spectral differentiation is exact per mode).

Conventions: the target metric is 4 g_FS, so
|dbar Psi|^2_g = 4 |pi_{L-perp} d_zbar F|^2 / (e^{2u} |F|^2) with e^{2u} the
conformal factor of the domain metric, and E10 - E01 = 4 pi deg(Psi).  The
energy integrands are conformally invariant, so quadrature always runs
against the flat chart measure.  All exported scalars are invariant under
lift gauge changes F -> h F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


from .errors import (
    CommonZeroOnGrid,
    EvenAmbientDimension,
    HolomorphicMap,
    LiftVanishes,
    MixedEigenvalues,
    NotAnEigenspinor,
    QuadratureUnresolved,
)
from .lattice import TorusGeometry
from .torus import FourierField, SpinorCoefficients

#: lift samples with |F| below this relative threshold are counted as near
#: zeros; quadrature keeps them (polynomial evaluation stays relatively
#: accurate near removable lift zeros -- the error scales with the largest
#: local term, not the chart max), while pointwise queries refuse them
ZERO_EXCLUSION = 1e-8


# --------------------------------------------------------------------------
# polynomial lifts in (z, zbar)
# --------------------------------------------------------------------------

class PolyLift:
    """Vector-valued polynomial F(z, zbar) = sum_{p,q} C[p,q,:] z^p zbar^q."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[:, :, None]
        self.coeffs = _trim(c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[2]

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1

    def __call__(self, z) -> np.ndarray:
        """Evaluate; returns shape z.shape + (dim,)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        P, Q, d = self.coeffs.shape
        vp = np.vander(flat, P, increasing=True)
        vq = np.vander(np.conj(flat), Q, increasing=True)
        tmp = vp @ self.coeffs.reshape(P, Q * d)
        out = np.einsum("aq,aqi->ai", vq, tmp.reshape(-1, Q, d))
        return out.reshape(z.shape + (d,))

    def dz(self) -> "PolyLift":
        P = self.coeffs.shape[0]
        if P == 1:
            return PolyLift(np.zeros((1, 1, self.dim)))
        factors = np.arange(1, P).reshape(-1, 1, 1)
        return PolyLift(self.coeffs[1:] * factors)

    def dzbar(self) -> "PolyLift":
        Q = self.coeffs.shape[1]
        if Q == 1:
            return PolyLift(np.zeros((1, 1, self.dim)))
        factors = np.arange(1, Q).reshape(1, -1, 1)
        return PolyLift(self.coeffs[:, 1:] * factors)

    def conjugated(self) -> "PolyLift":
        return PolyLift(np.conj(self.coeffs).transpose(1, 0, 2))

    def hermitian_pairing(self, other: "PolyLift") -> "PolyLift":
        """The scalar polynomial <self, other> = sum_i self_i conj(other_i)."""
        oc = other.conjugated().coeffs
        out = None
        for i in range(self.dim):
            term = _conv2(self.coeffs[:, :, i], oc[:, :, i])
            out = term if out is None else _pad_add(out, term)
        return PolyLift(out[:, :, None] if out.ndim == 2 else out)

    def norm_sq(self) -> "PolyLift":
        return self.hermitian_pairing(self)

    def scalar_mul(self, scalar: "PolyLift") -> "PolyLift":
        """Multiply by a scalar polynomial (dim-1 PolyLift)."""
        s = scalar.coeffs[:, :, 0]
        parts = [_conv2(s, self.coeffs[:, :, i]) for i in range(self.dim)]
        return PolyLift(np.stack(parts, axis=-1))

    def __add__(self, other: "PolyLift") -> "PolyLift":
        a, b = self.coeffs, other.coeffs
        P = max(a.shape[0], b.shape[0])
        Q = max(a.shape[1], b.shape[1])
        out = np.zeros((P, Q, self.dim), dtype=complex)
        out[:a.shape[0], :a.shape[1]] += a
        out[:b.shape[0], :b.shape[1]] += b
        return PolyLift(out)

    def __sub__(self, other: "PolyLift") -> "PolyLift":
        return self + PolyLift(-other.coeffs)

    def matmul(self, matrix: np.ndarray) -> "PolyLift":
        """Apply a constant matrix to the vector of components."""
        return PolyLift(np.einsum("ij,pqj->pqi", matrix, self.coeffs))

    def chart_flip(self) -> "PolyLift":
        """Lift of the same projective map in the chart w = 1/z.

        G(w, wbar) = w^P wbar^Q F(1/w, 1/wbar) reverses the coefficients.
        """
        return PolyLift(self.coeffs[::-1, ::-1])

    def max_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def _trim(c: np.ndarray) -> np.ndarray:
    keep = np.abs(c) > 0
    if not keep.any():
        return np.zeros((1, 1, c.shape[2]), dtype=complex)
    ps = np.nonzero(keep.any(axis=(1, 2)))[0]
    qs = np.nonzero(keep.any(axis=(0, 2)))[0]
    return np.ascontiguousarray(c[: ps[-1] + 1, : qs[-1] + 1])


def _conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # direct shifted accumulation: exact to rounding, unlike fft convolution,
    # whose absolute noise wrecks the small coefficients the Frenet recursion
    # relies on for orthogonality
    if a.size == 1 or b.size == 1:
        return a.reshape(-1)[0] * b if a.size == 1 else b.reshape(-1)[0] * a
    if a.size > b.size:
        a, b = b, a
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1),
                   dtype=complex)
    for p, q in zip(*np.nonzero(a)):
        out[p:p + b.shape[0], q:q + b.shape[1]] += a[p, q] * b
    return out


def _pad_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    P, Q = max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])
    out = np.zeros((P, Q), dtype=complex)
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out


def quaternion_matrix(dim: int) -> np.ndarray:
    """Matrix of z -> (-conj z2, conj z1, -conj z4, conj z3, ...) without the
    conjugation: I(F) = J @ conj(F)."""
    if dim % 2:
        raise EvenAmbientDimension(f"quaternionic structure needs even dim, got {dim}")
    J = np.zeros((dim, dim))
    for k in range(dim // 2):
        J[2 * k, 2 * k + 1] = -1.0
        J[2 * k + 1, 2 * k] = 1.0
    return J


# --------------------------------------------------------------------------
# sample blocks and map backends
# --------------------------------------------------------------------------

@dataclass
class SampleBlock:
    """Lift data on one chart: points, chart-measure weights, F and its
    derivatives, and the metric factor e^{2u} = |d_z|^2_g.  ``near_zero``
    counts flagged samples with |F| below the relative threshold; exact
    zeros are dropped."""

    chart: int
    z: np.ndarray
    weights: np.ndarray
    F: np.ndarray
    Fz: np.ndarray
    Fzb: np.ndarray
    Fzzb: np.ndarray
    e2u: np.ndarray
    near_zero: int = 0


def _disk_nodes(n_r: int = 48, n_t: int = 120, r_max: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * r_max * (x + 1.0)
    wr = 0.5 * r_max * w
    t = 2 * math.pi * (np.arange(n_t) + 0.5) / n_t
    Z = r[:, None] * np.exp(1j * t)[None, :]
    W = (wr * r)[:, None] * np.full(n_t, 2 * math.pi / n_t)[None, :]
    return Z.ravel(), W.ravel()


class SphereMap:
    """Map CP^1 -> CP^n from a polynomial lift on the z-chart.

    Quadrature covers the two unit disks |z| <= 1 and |w| <= 1, which tile the
    round sphere exactly; the integrands are chart-covariant so no partition
    weights are needed.  The metric is the round one, e^{2u} = 4/(1+|z|^2)^2.
    """

    domain = "sphere"

    def __init__(self, lift: PolyLift, n_r: int | None = None, n_t: int | None = None):
        self.lift = lift
        self.lift_flipped = lift.chart_flip()
        deg = sum(lift.bidegree)
        # quadrature must resolve rational integrands built from two copies of
        # the lift: radial degree ~2*deg, angular frequencies ~2*deg
        self.n_r = n_r if n_r is not None else max(48, int(1.5 * deg) + 32)
        self.n_t = n_t if n_t is not None else max(120, 2 * deg + 48)

    @property
    def ambient_dim(self) -> int:
        return self.lift.dim

    def sample_blocks(self) -> list[SampleBlock]:
        out = []
        z, w = _disk_nodes(self.n_r, self.n_t)
        for chart, lift in ((0, self.lift), (1, self.lift_flipped)):
            out.append(_poly_block(chart, lift, z, w))
        return out

    def point_block(self, z, chart: int = 0) -> SampleBlock:
        lift = self.lift if chart == 0 else self.lift_flipped
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return _poly_block(chart, lift, z, np.full(z.shape, np.nan))


class GaugedSphereMap:
    """F -> h F for a scalar polynomial gauge h, applied pointwise to the
    sample blocks of any sphere-domain map (product rule on derivatives)."""

    domain = "sphere"

    def __init__(self, base, scalar: PolyLift):
        self.base = base
        self.scalar = scalar

    @property
    def ambient_dim(self) -> int:
        return self.base.ambient_dim

    def _gauge(self, block: SampleBlock) -> SampleBlock:
        h = self.scalar(block.z)[..., 0]
        hz = self.scalar.dz()(block.z)[..., 0]
        hzb = self.scalar.dzbar()(block.z)[..., 0]
        hzzb = self.scalar.dz().dzbar()(block.z)[..., 0]
        F = h[..., None] * block.F
        Fz = h[..., None] * block.Fz + hz[..., None] * block.F
        Fzb = h[..., None] * block.Fzb + hzb[..., None] * block.F
        Fzzb = (h[..., None] * block.Fzzb + hz[..., None] * block.Fzb
                + hzb[..., None] * block.Fz + hzzb[..., None] * block.F)
        return SampleBlock(block.chart, block.z, block.weights, F, Fz, Fzb, Fzzb,
                           block.e2u, block.near_zero)

    def sample_blocks(self) -> list[SampleBlock]:
        return [self._gauge(b) for b in self.base.sample_blocks()]

    def point_block(self, z, chart: int = 0) -> SampleBlock:
        return self._gauge(self.base.point_block(z, chart))


def _poly_block(chart, lift, z, w) -> SampleBlock:
    F = lift(z)
    Fz = lift.dz()(z)
    Fzb = lift.dzbar()(z)
    Fzzb = lift.dz().dzbar()(z)
    e2u = 4.0 / (1.0 + np.abs(z) ** 2) ** 2
    norms = np.linalg.norm(F, axis=-1)
    scale = max(float(norms.max()), 1e-300)
    near = int(np.count_nonzero(norms <= ZERO_EXCLUSION * scale))
    keep = norms > 0.0
    if not keep.all():
        z, w, F, Fz, Fzb, Fzzb, e2u = (a[keep] for a in (z, w, F, Fz, Fzb, Fzzb, e2u))
    return SampleBlock(chart, z, w, F, Fz, Fzb, Fzzb, e2u, near)


class TorusMap:
    """Map T^2 -> CP^n from component fields supported on Gamma* + eta.

    Each component is a dict {(m, n): coeff} over integer dual coordinates
    with the common half-integer shift eta of the spin character; products of
    components with conjugates are honest periodic functions, so the map is
    well defined on the torus.  Differentiation is exact per mode.
    """

    domain = "torus"

    def __init__(self, geometry: TorusGeometry, components: list[dict],
                 omega: FourierField | None = None, grid: tuple = (64, 64),
                 eigenvalue: float | None = None):
        self.geometry = geometry
        self.components = components
        self.omega = omega
        self.grid = grid
        self.eigenvalue = eigenvalue

    @property
    def ambient_dim(self) -> int:
        return len(self.components)

    def _dual_vector(self, m, n):
        from .lattice import affine_shift, dual_basis
        g1, g2 = dual_basis(self.geometry.lattice)
        eta = affine_shift(self.geometry)
        return (m * g1.u + n * g2.u + eta.u, m * g1.v + n * g2.v + eta.v)

    def _component_grid(self, comp: dict, dz_order: int, dzb_order: int) -> np.ndarray:
        n1, n2 = self.grid
        spec = np.zeros((n1, n2), dtype=complex)
        for (m, n), c in comp.items():
            u, v = self._dual_vector(m, n)
            factor = (1j * math.pi * (u - 1j * v)) ** dz_order \
                * (1j * math.pi * (u + 1j * v)) ** dzb_order
            spec[m % n1, n % n2] += c * factor
        vals = np.fft.ifft2(spec) * (n1 * n2)
        chi = self.geometry.character
        if not chi.is_trivial:
            s1 = np.arange(n1) / n1
            s2 = np.arange(n2) / n2
            phase = np.exp(1j * math.pi * (chi.chi1 * s1[:, None] + chi.chi2 * s2[None, :]))
            vals = vals * phase
        return vals.ravel()

    def sample_blocks(self) -> list[SampleBlock]:
        n1, n2 = self.grid
        stacks = {}
        for orders in ((0, 0), (1, 0), (0, 1), (1, 1)):
            stacks[orders] = np.stack(
                [self._component_grid(c, *orders) for c in self.components], axis=-1)
        lat = self.geometry.lattice
        s1 = np.arange(n1) / n1
        s2 = np.arange(n2) / n2
        # chart coordinate z = x + i y with (x, y) = s1 gamma1 + s2 gamma2
        X = s1[:, None] * 1.0 + s2[None, :] * lat.a
        Y = s2[None, :] * lat.b + 0.0 * s1[:, None]
        z = (X + 1j * Y).ravel()
        w = np.full(n1 * n2, lat.b / (n1 * n2))
        if self.omega is not None:
            e2u = np.exp(2.0 * self.omega.values(self.grid)).ravel()
        else:
            e2u = np.ones(n1 * n2)
        F = stacks[(0, 0)]
        norms = np.linalg.norm(F, axis=-1)
        near = int(np.count_nonzero(norms <= ZERO_EXCLUSION * max(norms.max(), 1e-300)))
        block = SampleBlock(0, z, w, F, stacks[(1, 0)], stacks[(0, 1)],
                            stacks[(1, 1)], e2u, near)
        return [block]

    def gauged(self, scalar: dict) -> "TorusMap":
        """Multiply the lift by a periodic Fourier scalar (integer keys)."""
        out = []
        for comp in self.components:
            merged: dict = {}
            for (m, n), c in comp.items():
                for (dm, dn), h in scalar.items():
                    key = (m + dm, n + dn)
                    merged[key] = merged.get(key, 0.0) + c * h
            out.append(merged)
        return TorusMap(self.geometry, out, self.omega, self.grid, self.eigenvalue)


# --------------------------------------------------------------------------
# pointwise projective geometry
# --------------------------------------------------------------------------

def _pi_perp(F: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Project V off the complex line through F (rowwise)."""
    inner = np.einsum("...i,...i->...", V, np.conj(F))
    nsq = np.einsum("...i,...i->...", F, np.conj(F)).real
    return V - (inner / nsq)[..., None] * F


def _norms(V: np.ndarray) -> np.ndarray:
    return np.linalg.norm(V, axis=-1)


def energy_density_arrays(block: SampleBlock) -> tuple[np.ndarray, np.ndarray]:
    """(|dPsi|^2_g, |dbarPsi|^2_g) on the block, metric 4 g_FS on the target."""
    nsq = _norms(block.F) ** 2
    dz = _norms(_pi_perp(block.F, block.Fz)) ** 2
    dzb = _norms(_pi_perp(block.F, block.Fzb)) ** 2
    return 4 * dz / (block.e2u * nsq), 4 * dzb / (block.e2u * nsq)


def energy_densities(map_obj, point) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise energy densities at chart-0 points of a sphere map."""
    block = map_obj.point_block(point)
    if block.near_zero or len(block.z) < np.atleast_1d(point).size:
        raise LiftVanishes("lift vanishes at a requested point")
    return energy_density_arrays(block)


@dataclass(frozen=True)
class EnergyReport:
    E10: float
    E01: float
    degree: int
    degree_residual: float
    near_zero_nodes: int = 0


def energies(map_obj, residual_tol: float = 1e-3) -> EnergyReport:
    """Quadrature energies and the degree from E10 - E01 = 4 pi deg."""
    e10 = e01 = 0.0
    flagged = 0
    for block in map_obj.sample_blocks():
        nsq = _norms(block.F) ** 2
        e10 += float(np.sum(block.weights * 4 * _norms(_pi_perp(block.F, block.Fz)) ** 2 / nsq))
        e01 += float(np.sum(block.weights * 4 * _norms(_pi_perp(block.F, block.Fzb)) ** 2 / nsq))
        flagged += block.near_zero
    dev = (e10 - e01) / (4 * math.pi)
    degree = int(round(dev))
    if abs(dev - degree) > residual_tol:
        raise QuadratureUnresolved(
            f"(E10-E01)/4pi = {dev} not within {residual_tol} of an integer")
    return EnergyReport(e10, e01, degree, abs(e10 - e01 - 4 * math.pi * degree), flagged)


def harmonic_residual(map_obj) -> float:
    """RMS over the domain of |R|/|F| for the tension-type residual

    R = pi_perp d_z (pi_perp d_zbar F) - (⟨d_z F, F⟩/|F|^2) pi_perp d_zbar F,

    which vanishes identically iff the map is harmonic; |R|/|F| is gauge
    invariant.
    """
    total = weight = 0.0
    for block in map_obj.sample_blocks():
        r = _harmonic_residual_block(block)
        total += float(np.sum(block.weights * r ** 2))
        weight += float(np.sum(block.weights))
    return math.sqrt(total / weight)


def _harmonic_residual_block(block: SampleBlock) -> np.ndarray:
    F, Fz, Fzb, Fzzb = block.F, block.Fz, block.Fzb, block.Fzzb
    nsq = (_norms(F) ** 2)
    u = _pi_perp(F, Fzb)
    gz = np.einsum("...i,...i->...", Fzb, np.conj(F)) / nsq
    # d_z u = F_zzb - d_z[gz] F - gz F_z ; project off F afterwards
    gz_z = (np.einsum("...i,...i->...", Fzzb, np.conj(F))
            + np.einsum("...i,...i->...", Fzb, np.conj(Fzb))
            - gz * (np.einsum("...i,...i->...", Fz, np.conj(F))
                    + np.einsum("...i,...i->...", F, np.conj(Fzb)))) / nsq
    du = Fzzb - gz_z[..., None] * F - gz[..., None] * Fz
    alpha = np.einsum("...i,...i->...", Fz, np.conj(F)) / nsq
    R = _pi_perp(F, du) - alpha[..., None] * u
    return _norms(R) / np.sqrt(nsq)


@dataclass(frozen=True)
class QuaternionicReport:
    alignment: float
    min_dbar_norm: float
    degenerate: bool = False


def quaternionic_check(map_obj, dbar_tol: float = 1e-10) -> QuaternionicReport:
    """Alignment of the dbar image line with I(L0), and the minimum |dbarPsi|.

    alignment = max over samples of 1 - |<u, I(F)>| / (|u| |I(F)|), where
    u = pi_perp d_zbar F.  Holomorphic maps (dbarPsi = 0) are degenerate.
    """
    J = quaternion_matrix(map_obj.ambient_dim)
    worst = 0.0
    min_dbar = math.inf
    any_valid = False
    for block in map_obj.sample_blocks():
        u = _pi_perp(block.F, block.Fzb)
        IF = np.einsum("ij,...j->...i", J, np.conj(block.F))
        un = _norms(u)
        dbar_norm = 2.0 * un / (np.sqrt(block.e2u) * _norms(block.F))
        min_dbar = min(min_dbar, float(dbar_norm.min()))
        valid = un > dbar_tol * max(float(un.max()), 1e-300)
        if not valid.any():
            continue
        any_valid = True
        inner = np.abs(np.einsum("...i,...i->...", u[valid], np.conj(IF[valid])))
        worst = max(worst, float(np.max(1.0 - inner / (un[valid] * _norms(IF[valid])))))
    if not any_valid:
        return QuaternionicReport(math.nan, 0.0, degenerate=True)
    return QuaternionicReport(worst, min_dbar)


@dataclass(frozen=True)
class InducedMetricField:
    """Pointwise conformal factor g_Psi / g = |dbarPsi|^2_g with zero flags."""

    values: np.ndarray
    z: np.ndarray
    near_zeros: int


def induced_metric(map_obj, zero_tol: float = 1e-8) -> InducedMetricField:
    values = []
    zs = []
    for block in map_obj.sample_blocks():
        values.append(energy_density_arrays(block)[1])
        zs.append(block.z)
    values = np.concatenate(values)
    zs = np.concatenate(zs)
    top = float(values.max())
    if top < zero_tol:
        raise HolomorphicMap("dbar Psi vanishes identically; no induced metric")
    near = int(np.count_nonzero(values < zero_tol * top))
    return InducedMetricField(values, zs, near)


def weak_conformality(map_obj) -> float:
    """sup over samples of |<d_z F, pi_perp d_zbar F>| / |F|^2.

    Zero (given harmonicity) characterizes branched minimal immersions.  The
    |F|^2 normalization makes the defect gauge invariant (the d_z gauge term
    pairs with F and is killed by the projection) and keeps holomorphic or
    anti-holomorphic maps at an honest zero instead of a 0/0.
    """
    worst = 0.0
    for block in map_obj.sample_blocks():
        u = _pi_perp(block.F, block.Fzb)
        inner = np.abs(np.einsum("...i,...i->...", block.Fz, np.conj(u)))
        worst = max(worst, float(np.max(inner / _norms(block.F) ** 2)))
    return worst


@dataclass(frozen=True)
class IndexReport:
    degree: int
    predicted_index: int
    min_dbar_norm: float
    near_zero_count: int


def index_consistency(map_obj, zero_tol: float = 1e-6) -> IndexReport:
    """Report -chi(S^2) - deg * chi(CP^1) = -2 - 2 deg next to a zero scan of
    dbarPsi (grid diagnostics only; exact orders are out of numeric scope)."""
    if map_obj.domain != "sphere":
        raise ValueError("index bookkeeping is for sphere-domain maps")
    report = energies(map_obj)
    metric = induced_metric(map_obj)
    predicted = -2 - 2 * report.degree
    near = int(np.count_nonzero(metric.values < zero_tol * metric.values.max()))
    return IndexReport(report.degree, predicted, math.sqrt(float(metric.values.min())), near)


# --------------------------------------------------------------------------
# maps from eigenspinors
# --------------------------------------------------------------------------

def from_eigenspinors(spinors: list[SpinorCoefficients], geometry: TorusGeometry,
                      omega: FourierField | None = None, grid: tuple = (64, 64)
                      ) -> TorusMap:
    """Lift F = (f_{1+}, f_{1-}, ...) of [psi_{1+} : conj(psi_{1-}) : ...].

    f_{j+} carries the psi_+ coefficients; f_{j-} = conj(psi_-) lives on the
    reflected modes (-m - chi1, -n - chi2), still inside Gamma* + eta.  All
    spinors must share one nonzero eigenvalue and have no common zero on the
    sample grid.
    """
    if not spinors:
        raise ValueError("need at least one eigenspinor")
    lam = spinors[0].eigenvalue
    if abs(lam) < 1e-12:
        raise MixedEigenvalues("kernel spinors do not define an eigenspinor map")
    for s in spinors:
        if abs(s.eigenvalue - lam) > 1e-8 * max(1.0, abs(lam)):
            raise MixedEigenvalues(f"eigenvalues differ: {s.eigenvalue} vs {lam}")
    chi = geometry.character
    scale = 1.0 / math.sqrt(geometry.lattice.b)
    components = []
    for s in spinors:
        plus = {}
        minus = {}
        for xi, cp, cm in zip(s.basis, s.plus_component, s.minus_component):
            m, n = xi.index
            if cp != 0:
                plus[(m, n)] = plus.get((m, n), 0.0) + cp * scale
            if cm != 0:
                key = (-m - chi.chi1, -n - chi.chi2)
                minus[key] = minus.get(key, 0.0) + np.conj(cm) * scale
        components.extend([plus, minus])
    out = TorusMap(geometry, components, omega, grid, eigenvalue=lam)
    block = out.sample_blocks()[0]
    if block.near_zero:
        raise CommonZeroOnGrid(f"{block.near_zero} grid nodes below the zero threshold")
    return out


def eigenspinor_system_residual(map_obj: TorusMap) -> float:
    """Sup residual of d_zbar(f_{j+}, f_{j-}) = lambda/(2|s0|^2) (-conj f_{j-}, conj f_{j+}).

    With the flat trivialization |s0|^2_g = e^{-w}; the right side is exactly
    (lambda/2) e^{w} I(F), so the residual is |F_zb - (lambda/2) e^w I(F)|
    relative to the lift scale.  Requires the map to carry its eigenvalue via
    the construction in from_eigenspinors.
    """
    lam = map_obj.eigenvalue
    block = map_obj.sample_blocks()[0]
    J = quaternion_matrix(map_obj.ambient_dim)
    IF = np.einsum("ij,...j->...i", J, np.conj(block.F))
    ew = block.e2u ** 0.5
    res = block.Fzb - 0.5 * lam * ew[..., None] * IF
    return float(np.max(_norms(res)) / np.max(_norms(block.F)))


def cp1_sphere_coordinates(map_obj) -> np.ndarray:
    """Euclidean S^2 coordinates of a CP^1 map: rows (n1, n2, n3)."""
    if map_obj.ambient_dim != 2:
        raise ValueError("S^2 coordinates need a CP^1 target")
    out = []
    for block in map_obj.sample_blocks():
        z0, z1 = block.F[..., 0], block.F[..., 1]
        nsq = np.abs(z0) ** 2 + np.abs(z1) ** 2
        cross = z0 * np.conj(z1)
        out.append(np.stack([2 * cross.real / nsq, 2 * cross.imag / nsq,
                             (np.abs(z0) ** 2 - np.abs(z1) ** 2) / nsq], axis=-1))
    return np.concatenate(out)


# --------------------------------------------------------------------------
# energy-momentum tensor
# --------------------------------------------------------------------------

@dataclass
class ChartSpinor:
    """Eigenspinor data on a chart: component functions of (f+ s0, f- s0bar),
    their derivatives, and the metric factor u with g = e^{2u} |dz|^2."""

    f_plus: np.ndarray
    f_minus: np.ndarray
    fp_z: np.ndarray
    fp_zb: np.ndarray
    fm_z: np.ndarray
    fm_zb: np.ndarray
    u: np.ndarray
    u_z: np.ndarray
    weights: np.ndarray | None = None

    def norm_sq_g(self) -> np.ndarray:
        """|psi|^2_g = (|f+|^2 + |f-|^2) e^{-u}."""
        return (np.abs(self.f_plus) ** 2 + np.abs(self.f_minus) ** 2) * np.exp(-self.u)


@dataclass(frozen=True)
class QTensorField:
    """Symmetric 2x2 form field in chart coordinates, plus the trace check."""

    Qxx: np.ndarray
    Qxy: np.ndarray
    Qyy: np.ndarray
    e2u: np.ndarray
    trace_residual: float


def eigenspinor_residual(spinor: ChartSpinor, lam: float) -> float:
    """Sup residual of the first-order system 2|s0|^2 d_z f- = lam f+,
    -2|s0|^2 d_zbar f+ = lam f- with |s0|^2 = e^{-u}."""
    two_s0 = 2.0 * np.exp(-spinor.u)
    r1 = two_s0 * spinor.fm_z - lam * spinor.f_plus
    r2 = -two_s0 * spinor.fp_zb - lam * spinor.f_minus
    scale = max(float(np.max(np.abs(spinor.f_plus))),
                float(np.max(np.abs(spinor.f_minus))), 1e-300)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale / max(abs(lam), 1.0))


def energy_momentum(spinor: ChartSpinor, lam: float,
                    eigen_tol: float = 1e-6) -> QTensorField:
    """Q(X,Y) = Re(<X . grad_Y psi, psi> + <Y . grad_X psi, psi>) / 2 on the
    chart, from the local Clifford multiplication and Chern connection
    formulas; the g-trace must reproduce lam |psi|^2 (post-checked)."""
    if eigenspinor_residual(spinor, lam) > eigen_tol:
        raise NotAnEigenspinor("first-order eigenspinor system residual too large")
    eu = np.exp(spinor.u)
    emu = np.exp(-spinor.u)
    uz = spinor.u_z
    uzb = np.conj(uz)

    def nabla(alpha, beta):
        # alpha * nabla_dz + beta * nabla_dzbar on (f+, f-)
        a = alpha * (spinor.fp_z - spinor.f_plus * uz) + beta * spinor.fp_zb
        b = alpha * spinor.fm_z + beta * (spinor.fm_zb - spinor.f_minus * uzb)
        return a, b

    def clifford(alpha, beta, a, b):
        # (alpha dz + beta dzbar) . (a, b) = e^u (beta * b, -alpha * a)
        return eu * beta * b, -eu * alpha * a

    def herm(a1, b1):
        return (a1 * np.conj(spinor.f_plus) + b1 * np.conj(spinor.f_minus)) * emu

    vectors = {"x": (1.0, 1.0), "y": (1j, -1j)}
    derivs = {k: nabla(*vectors[k]) for k in vectors}

    def q(kx, ky):
        ax, bx = clifford(*vectors[kx], *derivs[ky])
        ay, by = clifford(*vectors[ky], *derivs[kx])
        return 0.5 * (herm(ax, bx) + herm(ay, by)).real

    Qxx, Qxy, Qyy = q("x", "x"), q("x", "y"), q("y", "y")
    trace = np.exp(-2.0 * spinor.u) * (Qxx + Qyy)
    target = lam * spinor.norm_sq_g()
    scale = max(float(np.max(np.abs(target))), 1e-300)
    residual = float(np.max(np.abs(trace - target)) / scale)
    return QTensorField(Qxx, Qxy, Qyy, np.exp(2.0 * spinor.u), residual)


def plane_wave_chart_spinor(spinor: SpinorCoefficients, grid: tuple = (32, 32)
                            ) -> ChartSpinor:
    """Chart data for a flat-torus eigenspinor (metric factor u = 0).

    In the flat trivialization the spinor IS the function pair, so the s0bar
    component is psi_- itself.
    """
    geometry = spinor.geometry
    comps = {}
    for orders in ((0, 0), (1, 0), (0, 1)):
        grids = _spinor_mode_grids(spinor, grid, orders)
        comps[orders] = grids
    fp, fm = comps[(0, 0)]
    fp_z, fm_z = comps[(1, 0)]
    fp_zb, fm_zb = comps[(0, 1)]
    zero = np.zeros(grid[0] * grid[1])
    return ChartSpinor(fp.ravel(), fm.ravel(),
                       fp_z.ravel(), fp_zb.ravel(),
                       fm_z.ravel(), fm_zb.ravel(),
                       zero, zero.astype(complex),
                       np.full(grid[0] * grid[1],
                               geometry.lattice.b / (grid[0] * grid[1])))


def _spinor_mode_grids(spinor: SpinorCoefficients, grid, orders):
    geometry = spinor.geometry
    n1, n2 = grid
    out = []
    for coeffs in (spinor.plus_component, spinor.minus_component):
        spec = np.zeros((n1, n2), dtype=complex)
        for xi, c in zip(spinor.basis, coeffs):
            m, n = xi.index
            factor = (1j * math.pi * (xi.u - 1j * xi.v)) ** orders[0] \
                * (1j * math.pi * (xi.u + 1j * xi.v)) ** orders[1]
            spec[m % n1, n % n2] += c * factor
        vals = np.fft.ifft2(spec) * (n1 * n2)
        chi = geometry.character
        if not chi.is_trivial:
            s1 = np.arange(n1) / n1
            s2 = np.arange(n2) / n2
            phase = np.exp(1j * math.pi * (chi.chi1 * s1[:, None] + chi.chi2 * s2[None, :]))
            vals = vals * phase
        out.append(vals / math.sqrt(geometry.lattice.b))
    return out
