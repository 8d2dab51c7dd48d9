"""Lattices, spin characters, and the shifted dual lattice behind flat-torus Dirac spectra.

A torus is the quotient of the plane by Gamma = Z(1,0) + Z(a,b) with b > 0.
A spin character chi assigns a bit to each basis vector and extends to a
homomorphism Gamma -> Z/2Z.  The shifted dual lattice

    Gamma*_chi = { xi in (R^2)* : xi(gamma) + chi(gamma)/2 in Z  for all gamma }
               = Gamma* + eta,      eta = (chi1 gamma1* + chi2 gamma2*) / 2,

parametrizes the flat Dirac spectrum {+-2pi|xi|}.  Everything here is exact
linear algebra on 2x2 systems plus a guaranteed-complete box enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLattice, RadiusTooLarge

#: Hard cap on the number of candidate lattice points visited per enumeration.
ENUMERATION_CAP = 2_000_000

_PAIRING_TOL = 1e-12


@dataclass(frozen=True)
class LatticeBasis:
    """Basis Gamma = Z(1,0) + Z(a,b); the unit cell has area b."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.b > 0.0) or not np.isfinite(self.a) or not np.isfinite(self.b):
            raise DegenerateLattice(f"lattice requires finite a and b > 0, got a={self.a}, b={self.b}")

    @property
    def basis_matrix(self) -> np.ndarray:
        """Rows are the basis vectors gamma1=(1,0), gamma2=(a,b)."""
        return np.array([[1.0, 0.0], [self.a, self.b]])

    @property
    def cell_area(self) -> float:
        return self.b


@dataclass(frozen=True)
class SpinCharacter:
    """Values of chi on the two basis vectors; each is 0 or 1."""

    chi1: int
    chi2: int

    def __post_init__(self):
        if self.chi1 not in (0, 1) or self.chi2 not in (0, 1):
            raise ValueError(f"character bits must be 0 or 1, got ({self.chi1}, {self.chi2})")

    @property
    def is_trivial(self) -> bool:
        return self.chi1 == 0 and self.chi2 == 0

    def value(self, m: int, n: int) -> int:
        """chi on the lattice vector m*gamma1 + n*gamma2."""
        return (m * self.chi1 + n * self.chi2) % 2


@dataclass(frozen=True)
class DualVector:
    """Element of (R^2)*, pairing xi(x, y) = u x + v y.

    ``index`` holds the integer coefficients (m, n) of xi - eta in the dual
    basis when the vector came out of an enumeration; it does not take part
    in equality.
    """

    u: float
    v: float
    index: tuple | None = field(default=None, compare=False)

    @property
    def norm(self) -> float:
        return float(np.hypot(self.u, self.v))

    def pair(self, x: float, y: float) -> float:
        return self.u * x + self.v * y

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class TorusGeometry:
    """A lattice together with a spin character."""

    lattice: LatticeBasis
    character: SpinCharacter

    def __post_init__(self):
        g1, g2 = dual_basis(self.lattice)
        basis = self.lattice.basis_matrix
        pair = np.array([[g1.pair(*basis[0]), g1.pair(*basis[1])],
                         [g2.pair(*basis[0]), g2.pair(*basis[1])]])
        if not np.allclose(pair, np.eye(2), atol=_PAIRING_TOL):
            raise DegenerateLattice("dual basis fails the pairing gamma_i*(gamma_j) = delta_ij")

    @property
    def area(self) -> float:
        return self.lattice.cell_area


def dual_basis(lattice: LatticeBasis) -> tuple[DualVector, DualVector]:
    """Dual basis (gamma1*, gamma2*) with gamma_i*(gamma_j) = delta_ij.

    For Gamma = Z(1,0) + Z(a,b) the 2x2 system solves in closed form to
    gamma1* = (1, -a/b), gamma2* = (0, 1/b).
    """
    a, b = lattice.a, lattice.b
    return DualVector(1.0, -a / b), DualVector(0.0, 1.0 / b)


def affine_shift(geometry: TorusGeometry) -> DualVector:
    """The shift eta = (chi(gamma1) gamma1* + chi(gamma2) gamma2*) / 2."""
    g1, g2 = dual_basis(geometry.lattice)
    chi = geometry.character
    return DualVector(0.5 * (chi.chi1 * g1.u + chi.chi2 * g2.u),
                      0.5 * (chi.chi1 * g1.v + chi.chi2 * g2.v))


def _enumerate_general(basis_matrix: np.ndarray, shift: np.ndarray, radius: float,
                       cap: int) -> np.ndarray:
    """All xi = m g1* + n g2* + shift with |xi| <= radius, for the lattice whose
    direct basis vectors are the rows of ``basis_matrix``.

    Returns an array of rows (m, n, u, v) sorted by |xi| then lexicographically.
    The integer box uses m = (xi - shift)(gamma1), so |m| <= (radius + |shift|)|gamma1|,
    padded by one to be safe against rounding at the boundary.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    dual = np.linalg.inv(basis_matrix).T  # rows g1*, g2*
    r_eff = radius + float(np.hypot(*shift))
    m_max = int(np.floor(r_eff * np.linalg.norm(basis_matrix[0]))) + 1
    n_max = int(np.floor(r_eff * np.linalg.norm(basis_matrix[1]))) + 1
    if (2 * m_max + 1) * (2 * n_max + 1) > cap:
        raise RadiusTooLarge(
            f"enumeration box {(2 * m_max + 1)}x{(2 * n_max + 1)} exceeds cap {cap}")
    ms = np.arange(-m_max, m_max + 1)
    ns = np.arange(-n_max, n_max + 1)
    mm, nn = np.meshgrid(ms, ns, indexing="ij")
    pts = mm[..., None] * dual[0] + nn[..., None] * dual[1] + shift
    norms = np.hypot(pts[..., 0], pts[..., 1])
    keep = norms <= radius + 1e-12 * max(1.0, radius)
    rows = np.column_stack([mm[keep], nn[keep], pts[keep][:, 0], pts[keep][:, 1]])
    order = np.lexsort((rows[:, 3], rows[:, 2], np.hypot(rows[:, 2], rows[:, 3])))
    return rows[order]


def enumerate_shifted_dual(geometry: TorusGeometry, radius: float,
                           cap: int = ENUMERATION_CAP) -> list[DualVector]:
    """All xi in Gamma*_chi with |xi| <= radius, sorted by |xi| then (u, v).

    Complete by construction: the integer box bounds come from the pairing
    with the direct basis (Cauchy-Schwarz), padded by one.
    """
    shift = affine_shift(geometry).as_array()
    rows = _enumerate_general(geometry.lattice.basis_matrix, shift, radius, cap)
    return [DualVector(u, v, index=(int(m), int(n))) for m, n, u, v in rows]


def validate_moduli(geometry: TorusGeometry) -> tuple[bool, str]:
    """Membership of (a, b) in the fundamental domain for the spin structure.

    Trivial character: |a| <= 1/2 and a^2 + b^2 >= 1.  Non-trivial
    (normalized so chi(gamma1)=0, chi(gamma2)=1): |a| <= 1/2 and
    b^2 + (|a| - 1/2)^2 >= 1/4.  The diagnostic names the violated
    inequality.
    """
    a, b = geometry.lattice.a, geometry.lattice.b
    chi = geometry.character
    if abs(a) > 0.5 + 1e-15:
        return False, f"|a| <= 1/2 violated: a = {a}"
    if chi.is_trivial:
        if a * a + b * b < 1.0 - 1e-15:
            return False, f"a^2 + b^2 >= 1 violated: {a * a + b * b}"
        return True, "inside trivial fundamental domain"
    lhs = b * b + (abs(a) - 0.5) ** 2
    if lhs < 0.25 - 1e-15:
        return False, f"b^2 + (|a| - 1/2)^2 >= 1/4 violated: {lhs}"
    note = "" if (chi.chi1, chi.chi2) == (0, 1) else \
        " (closed-form spectra assume the normalized character chi=(0,1))"
    return True, "inside non-trivial fundamental domain" + note


def reduce_to_fundamental(lattice: LatticeBasis) -> LatticeBasis:
    """SL(2,Z) reduction of the modulus tau = a + i b to |a| <= 1/2, |tau| >= 1.

    Valid for the trivial character only: the reduction permutes the lattice
    basis and would transform a non-trivial character along with it.
    """
    tau = complex(lattice.a, lattice.b)
    for _ in range(10_000):
        tau = complex(tau.real - round(tau.real), tau.imag)
        if abs(tau) < 1.0 - 1e-15:
            tau = -1.0 / tau
        else:
            break
    else:
        raise RuntimeError("modular reduction did not terminate")
    return LatticeBasis(abs(tau.real) if abs(tau.real) > 1e-15 else 0.0, tau.imag)
