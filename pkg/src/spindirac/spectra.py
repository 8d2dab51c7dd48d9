"""Closed-form Dirac spectra and the two eigenvalue indexings.

Flat-torus spectra are {+-2pi|xi| : xi in Gamma*_chi}, counted so that the
complex multiplicity of a positive level equals the number of lattice
vectors attaining the norm and the quaternionic multiplicity is half that
(the antilinear pairing (psi+, psi-) -> (conj psi-, -conj psi+) matches xi
with -xi).  The kernel exists only for the trivial character (xi = 0,
quaternionic dimension 1).

Two indexings are exposed and never mixed: the positive enumeration
lambda_1 <= lambda_2 <= ... excludes the kernel and counts quaternionic
multiplicity; the squared enumeration includes the kernel as leading zeros
and counts each positive level twice its quaternionic multiplicity (both
signs square to the same value).

The round unit sphere enters as a reference spectrum: positive eigenvalues
j = 1, 2, ... with complex multiplicity 2j, area 4pi, no kernel.  Note on
indices of the order-m eigenspinor maps: under quaternionic counting the
eigenvalue m occupies positions m(m-1)/2 + 1 ... m(m+1)/2, so the two index
values quoted in the literature for small m do not agree with each other
under any single convention; this module only ever reports indices from its
own multiplicity count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IndexBeyondComputed
from .lattice import TorusGeometry, affine_shift, enumerate_shifted_dual

#: Relative tolerance for grouping numerically coincident eigenvalues.
GROUPING_RTOL = 1e-9


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: float
    complex_multiplicity: int
    quaternionic_multiplicity: int


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalue levels sorted ascending (negatives, kernel, positives)."""

    entries: tuple[SpectrumEntry, ...]
    area: float
    kernel_quaternionic_dim: int

    def positive_entries(self) -> list[SpectrumEntry]:
        return [e for e in self.entries if e.eigenvalue > 0]

    def eigenvalue(self, k: int) -> float:
        """lambda_k in the positive enumeration with quaternionic multiplicity."""
        if k < 1:
            raise IndexBeyondComputed(f"positive index must be >= 1, got {k}")
        seen = 0
        for entry in self.positive_entries():
            seen += entry.quaternionic_multiplicity
            if k <= seen:
                return entry.eigenvalue
        raise IndexBeyondComputed(f"only {seen} positive eigenvalues computed, asked for k={k}")


@dataclass(frozen=True)
class NormalizedEigenvalue:
    """Scale-invariant lambda_k * sqrt(area)."""

    value: float


def kernel_dimension(geometry: TorusGeometry) -> int:
    """Quaternionic kernel dimension: 1 for the trivial character, else 0.

    0 lies in Gamma*_chi iff the shift eta lies in Gamma*, which happens iff
    chi is trivial.
    """
    return 1 if geometry.character.is_trivial else 0


def _group_norms(norms: np.ndarray) -> list[tuple[float, int]]:
    """Group sorted nonneg norms into (value, count) levels at GROUPING_RTOL."""
    levels: list[tuple[float, int]] = []
    for value in norms:
        if levels and abs(value - levels[-1][0]) <= GROUPING_RTOL * max(1.0, abs(value)):
            levels[-1] = (levels[-1][0], levels[-1][1] + 1)
        else:
            levels.append((float(value), 1))
    return levels


def torus_spectrum(geometry: TorusGeometry, count: int) -> SpectrumReport:
    """The ``count`` smallest distinct positive levels 2pi|xi|, xi in Gamma*_chi.

    Enumeration radius grows until the requested number of distinct positive
    norms lies strictly inside it, which guarantees completeness of every
    reported level.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    b = geometry.lattice.b
    radius = math.sqrt((8.0 * count + 8.0) / (math.pi * b)) + affine_shift(geometry).norm
    for _ in range(64):
        vectors = enumerate_shifted_dual(geometry, radius)
        norms = np.array([v.norm for v in vectors])
        positive = np.sort(norms[norms > 1e-14])
        levels = _group_norms(positive)
        if len(levels) >= count:
            levels = levels[:count]
            break
        radius *= 1.6
    else:
        raise RuntimeError("radius growth failed to capture the requested levels")

    entries = []
    for value, n_xi in levels:
        lam = 2.0 * math.pi * value
        entries.append(SpectrumEntry(lam, n_xi, n_xi // 2))
    d = kernel_dimension(geometry)
    full = [SpectrumEntry(-e.eigenvalue, e.complex_multiplicity, e.quaternionic_multiplicity)
            for e in reversed(entries)]
    if d:
        full.append(SpectrumEntry(0.0, 2 * d, d))
    full.extend(entries)
    return SpectrumReport(tuple(full), area=b, kernel_quaternionic_dim=d)


def sphere_spectrum(count: int) -> SpectrumReport:
    """Round unit sphere: eigenvalues +-j with complex multiplicity 2j, area 4pi."""
    if count < 1:
        raise ValueError("count must be >= 1")
    pos = [SpectrumEntry(float(j), 2 * j, j) for j in range(1, count + 1)]
    neg = [SpectrumEntry(-e.eigenvalue, e.complex_multiplicity, e.quaternionic_multiplicity)
           for e in reversed(pos)]
    return SpectrumReport(tuple(neg + pos), area=4.0 * math.pi, kernel_quaternionic_dim=0)


def normalized(report: SpectrumReport, k: int) -> NormalizedEigenvalue:
    """lambda_k * sqrt(area) in the positive (kernel-excluded) enumeration."""
    return NormalizedEigenvalue(report.eigenvalue(k) * math.sqrt(report.area))


def squared_index(report: SpectrumReport, k_bar: int) -> float:
    """lambda at position k_bar when squares are enumerated increasingly.

    The kernel contributes its quaternionic dimension of leading zeros; each
    positive level contributes twice its quaternionic multiplicity (both
    signs share the square).  Returns the nonnegative root.
    """
    if k_bar < 1:
        raise IndexBeyondComputed(f"squared index must be >= 1, got {k_bar}")
    seen = report.kernel_quaternionic_dim
    if k_bar <= seen:
        return 0.0
    for entry in report.positive_entries():
        seen += 2 * entry.quaternionic_multiplicity
        if k_bar <= seen:
            return entry.eigenvalue
    raise IndexBeyondComputed(f"squared enumeration holds {seen} values, asked for {k_bar}")


def report_from_eigenvalues(values: np.ndarray, area: float, kernel_tol: float,
                            rtol: float = GROUPING_RTOL) -> SpectrumReport:
    """Group a raw eigenvalue array (e.g. from a discretizer) into a report.

    Eigenvalues with |lambda| <= kernel_tol count as kernel; the rest are
    grouped by relative gaps at ``rtol``.  Quaternionic multiplicities are
    the halved complex counts (discretizations preserve the pairing, so the
    counts are even; stray odd counts round up to keep the report usable).
    """
    values = np.sort(np.asarray(values, dtype=float))
    kernel = values[np.abs(values) <= kernel_tol]
    entries: list[SpectrumEntry] = []
    for sign in (-1, 1):
        part = values[(sign * values) > kernel_tol]
        levels = _group_norms(np.sort(np.abs(part)))
        signed = [SpectrumEntry(sign * val, mult, max(1, mult // 2)) for val, mult in levels]
        entries.extend(reversed(signed) if sign < 0 else signed)
        if sign < 0 and kernel.size:
            entries.append(SpectrumEntry(0.0, kernel.size, kernel.size // 2))
    return SpectrumReport(tuple(entries), area=area,
                          kernel_quaternionic_dim=kernel.size // 2)
