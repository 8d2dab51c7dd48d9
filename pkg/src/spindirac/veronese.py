"""Frenet frames of holomorphic curves and the Veronese quaternionic maps.

For a linearly full holomorphic Phi: CP^1 -> CP^{2m-1} the Frenet frame
Phi_0, ..., Phi_{2m-1} satisfies Span{Phi_0, ..., Phi_j} =
Span{Phi, dz Phi, ..., dz^j Phi}.  Frames are evaluated by pointwise
Gram-Schmidt on the exact symbolic z-derivatives of the polynomial lift,
which keeps full relative accuracy at every sample (a symbolic
denominator-cleared recursion loses the small coefficients that control the
frames near the chart poles).  The classical lifts f_j produced this way are
Koszul-Malgrange holomorphic, and the harmonic-sequence identities

    dz f_j = f_{j+1} + c_j f_j,      c_j = <dz f_j, f_j> / |f_j|^2,
    dzbar f_j = -(|f_j|^2 / |f_{j-1}|^2) f_{j-1},
    dz dzbar f_j = -(|f_j|^2 / |f_{j-1}|^2) (f_j + c_j f_{j-1}),

turn the flag evaluations into exact derivative data for the map machinery.

The Veronese curve [1 : sqrt(C(N,1)) z : ... : z^N], N = 2m-1, composed with
the isometry A that intertwines the end-reversal with the quaternionic
structure, has quaternionic harmonic mid frame Psi = A Phi_m; it is the map
by round-sphere Dirac eigenspinors with eigenvalue m, and the f_m gauge
realizes the family with constant summed density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import NotLinearlyFull
from .maps import ChartSpinor, PolyLift, SampleBlock, SphereMap, _disk_nodes, \
    quaternion_matrix


def veronese_curve(m: int) -> PolyLift:
    """Rational normal curve [1 : sqrt(C(N,1)) z : ... : z^N], N = 2m - 1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    N = 2 * m - 1
    coeffs = np.zeros((N + 1, 1, N + 1), dtype=complex)
    for j in range(N + 1):
        coeffs[j, 0, j] = math.sqrt(comb(N, j))
    return PolyLift(coeffs)


def ambient_isometry(m: int) -> np.ndarray:
    """Signed permutation with A I~ = I A: pairs ((-1)^j z_j, z_{2m-1-j})."""
    A = np.zeros((2 * m, 2 * m))
    for j in range(m):
        A[2 * j, j] = (-1.0) ** j
        A[2 * j + 1, 2 * m - 1 - j] = 1.0
    return A


def reversal_antilinear(m: int) -> np.ndarray:
    """Matrix of I~ without the conjugation: I~(F) = R conj(F)."""
    N = 2 * m - 1
    R = np.zeros((N + 1, N + 1))
    for j in range(N + 1):
        R[j, N - j] = (-1.0) ** (N - j)
    return R


@dataclass
class FrameValues:
    """Pointwise frame data at sample points z.

    frames[i] is f_i (shape pts x dim); csc[i] = c_i; norms_sq[i] = |f_i|^2.
    ``next_frame`` is f_{j+1} (zero once the flag is exhausted).
    """

    frames: list
    norms_sq: list
    csc: list
    next_frame: np.ndarray


def frame_values(phi: PolyLift, j: int, z, rank_tol: float = 1e-9) -> FrameValues:
    """Gram-Schmidt of the derivative flag (phi, dz phi, ..., dz^{j+1} phi)."""
    z = np.asarray(z, dtype=complex)
    ders = [phi]
    for _ in range(j + 1):
        ders.append(ders[-1].dz())
    flag = [d(z) for d in ders]
    frames: list = []
    norms_sq: list = []
    csc: list = []
    for i in range(j + 1):
        v = flag[i].astype(complex)
        orig_sq = np.einsum("...k,...k->...", v, np.conj(v)).real
        betas = []
        for f, nsq in zip(frames, norms_sq):
            beta = np.einsum("...k,...k->...", v, np.conj(f)) / nsq
            betas.append(beta)
            v = v - beta[..., None] * f
        nsq = np.einsum("...k,...k->...", v, np.conj(v)).real
        # rank deficiency is global: the median ratio collapses when the
        # curve is not linearly full (isolated inflection zeros would not)
        if float(np.median(nsq)) <= rank_tol ** 2 * float(np.median(orig_sq)):
            raise NotLinearlyFull(f"derivative flag degenerates at step {i}")
        frames.append(v)
        norms_sq.append(nsq)
        # c_i = (<dz^{i+1} phi, f_i> - beta^{(i)}_{i-1} |f_i|^2) / |f_i|^2
        top = np.einsum("...k,...k->...", flag[i + 1], np.conj(v))
        corr = betas[-1] * nsq if betas else 0.0
        csc.append((top - corr) / nsq)
        betas_last = betas
    # f_{j+1}: next flag member projected off everything (zero if exhausted)
    if j + 1 <= phi.dim - 1:
        v = flag[j + 1].astype(complex)
        for f, nsq in zip(frames, norms_sq):
            beta = np.einsum("...k,...k->...", v, np.conj(f)) / nsq
            v = v - beta[..., None] * f
    else:
        v = np.zeros_like(frames[-1])
    return FrameValues(frames, norms_sq, csc, v)


class FrameMap:
    """Frenet frame member Phi_j (optionally composed with a constant unitary)
    as a sphere-domain map with pointwise-exact lift derivatives."""

    domain = "sphere"

    def __init__(self, phi: PolyLift, j: int, matrix: np.ndarray | None = None,
                 n_r: int = 64, n_t: int = 160):
        if j < 0 or j > phi.dim - 1:
            raise ValueError(f"frame index {j} outside 0..{phi.dim - 1}")
        self.phi = phi
        self.j = j
        self.matrix = matrix
        self.n_r, self.n_t = n_r, n_t

    @property
    def ambient_dim(self) -> int:
        return self.phi.dim

    def _block(self, chart: int, z, w) -> SampleBlock:
        phi = self.phi if chart == 0 else self.phi.chart_flip()
        fv = frame_values(phi, self.j, z)
        f = fv.frames[self.j]
        c = fv.csc[self.j]
        Fz = fv.next_frame + c[..., None] * f
        if self.j == 0:
            Fzb = np.zeros_like(f)
            Fzzb = np.zeros_like(f)
        else:
            rho = fv.norms_sq[self.j] / fv.norms_sq[self.j - 1]
            prev = fv.frames[self.j - 1]
            Fzb = -rho[..., None] * prev
            Fzzb = -rho[..., None] * (f + c[..., None] * prev)
        if self.matrix is not None:
            f, Fz, Fzb, Fzzb = (np.einsum("ij,...j->...i", self.matrix, a)
                                for a in (f, Fz, Fzb, Fzzb))
        e2u = 4.0 / (1.0 + np.abs(z) ** 2) ** 2
        return SampleBlock(chart, z, w, f, Fz, Fzb, Fzzb, e2u, 0)

    def sample_blocks(self) -> list[SampleBlock]:
        z, w = _disk_nodes(self.n_r, self.n_t)
        return [self._block(0, z, w), self._block(1, z, w)]

    def point_block(self, z, chart: int = 0) -> SampleBlock:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self._block(chart, z, np.full(z.shape, np.nan))


def frenet_frame(phi: PolyLift, j: int) -> FrameMap:
    """The j-th Frenet frame member of a linearly full polynomial curve."""
    if j < 0 or j > phi.dim - 1:
        raise ValueError(f"frame index {j} outside 0..{phi.dim - 1}")
    probe = np.array([0.31 + 0.17j, -0.62 + 0.45j, 1.1 - 0.2j, 0.05 - 0.83j])
    frame_values(phi, j, probe)  # raises NotLinearlyFull on rank deficiency
    return FrameMap(phi, j)


@dataclass
class VeroneseMaps:
    """Holomorphic curve and its quaternionic mid-frame eigenspinor map."""

    m: int
    phi: SphereMap
    psi: FrameMap

    @property
    def eigenvalue(self) -> float:
        return float(self.m)


def veronese(m: int) -> VeroneseMaps:
    """Phi and the quaternionic harmonic Psi = A Phi_m for the order-m curve."""
    phi = veronese_curve(m)
    return VeroneseMaps(m, SphereMap(phi), FrameMap(phi, m, ambient_isometry(m)))


def eigenspinor_lift_values(maps: VeroneseMaps, z) -> tuple[np.ndarray, ...]:
    """(F, F_z, F_zb) of the eigenspinor-gauge lift at chart-0 points z.

    The Koszul-Malgrange lift f_m needs only a constant complex rescaling c:
    |c| pins sum_j |psi_j|^2 = 1 at a reference point (constancy of the
    profile is the caller's check), the phase makes
    dzbar F = (m/(1+|z|^2)) I(F) hold with a positive coefficient.
    """
    z = np.asarray(z, dtype=complex)
    m = maps.m
    block = maps.psi.point_block(z.ravel())
    F = block.F.reshape(z.shape + (2 * m,))
    Fz = block.Fz.reshape(z.shape + (2 * m,))
    Fzb = block.Fzb.reshape(z.shape + (2 * m,))

    z0 = 0.31 + 0.17j
    ref = maps.psi.point_block(np.array([z0]))
    J = quaternion_matrix(2 * m)
    IF0 = J @ np.conj(ref.F[0])
    kappa = np.vdot(IF0, ref.Fzb[0]) / np.vdot(IF0, IF0)
    phase = np.exp(-0.5j * np.angle(kappa * (1.0 + abs(z0) ** 2) / m))
    scale = math.sqrt(2.0 / ((1.0 + abs(z0) ** 2) * float(np.vdot(ref.F[0], ref.F[0]).real)))
    c = scale * phase
    return c * F, c * Fz, c * Fzb


def eigenspinor_family(maps: VeroneseMaps, z) -> list[ChartSpinor]:
    """The m-member eigenspinor family on the round sphere (lambda = m).

    psi_j = (f_{j+} s0, conj(f_{j-}) s0bar) with (f_{j+}, f_{j-}) the lift
    components (2j, 2j+1); metric factor u = log(2 / (1 + |z|^2)).
    """
    z = np.asarray(z, dtype=complex)
    F, Fz, Fzb = eigenspinor_lift_values(maps, z)
    u = np.log(2.0 / (1.0 + np.abs(z) ** 2))
    u_z = -np.conj(z) / (1.0 + np.abs(z) ** 2)
    out = []
    for j in range(maps.m):
        out.append(ChartSpinor(
            f_plus=F[..., 2 * j], f_minus=np.conj(F[..., 2 * j + 1]),
            fp_z=Fz[..., 2 * j], fp_zb=Fzb[..., 2 * j],
            fm_z=np.conj(Fzb[..., 2 * j + 1]), fm_zb=np.conj(Fz[..., 2 * j + 1]),
            u=u, u_z=u_z))
    return out


def family_density(maps: VeroneseMaps, z) -> np.ndarray:
    """sum_j |psi_j|^2_g on the round sphere; constant 1 for the canonical family."""
    spinors = eigenspinor_family(maps, z)
    return np.sum([s.norm_sq_g() for s in spinors], axis=0)
