import math

import numpy as np
import pytest

from spindirac.errors import IndexBeyondComputed
from spindirac.lattice import LatticeBasis, SpinCharacter, TorusGeometry, _enumerate_general
from spindirac.spectra import (
    SpectrumEntry,
    SpectrumReport,
    kernel_dimension,
    normalized,
    report_from_eigenvalues,
    sphere_spectrum,
    squared_index,
    torus_spectrum,
)
from tests.test_lattice import brute_force_shifted_dual


def oracle_levels(geometry, count, radius=12.0):
    """Brute-force spectrum oracle: enumerate Gamma*_chi in a box, sort 2pi|xi|."""
    from spindirac.lattice import affine_shift, dual_basis
    g1, g2 = dual_basis(geometry.lattice)
    eta = affine_shift(geometry)
    norms = []
    for m, n in brute_force_shifted_dual(geometry, radius, box=80):
        u = m * g1.u + n * g2.u + eta.u
        v = m * g1.v + n * g2.v + eta.v
        norms.append(math.hypot(u, v))
    norms = sorted(n for n in norms if n > 1e-14)
    levels = []
    for n in norms:
        if levels and abs(n - levels[-1][0]) <= 1e-9 * max(1.0, n):
            levels[-1][1] += 1
        else:
            levels.append([n, 1])
    return [(2 * math.pi * n, c) for n, c in levels[:count]]


class TestTorusSpectrum:
    def test_square_trivial(self):
        geo = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 0))
        rep = torus_spectrum(geo, 4)
        pos = rep.positive_entries()
        assert np.isclose(pos[0].eigenvalue, 2 * math.pi, atol=1e-12)
        # four minimal vectors (+-1,0),(0,+-1): complex 4, quaternionic 2
        assert pos[0].complex_multiplicity == 4
        assert pos[0].quaternionic_multiplicity == 2
        assert rep.kernel_quaternionic_dim == 1
        assert rep.area == 1.0

    def test_lambda1_trivial_formula(self):
        for a, b in [(0.0, 2.0), (0.5, 1.3), (0.2, 7.0)]:
            geo = TorusGeometry(LatticeBasis(a, b), SpinCharacter(0, 0))
            rep = torus_spectrum(geo, 1)
            assert abs(rep.eigenvalue(1) - 2 * math.pi / b) < 1e-12

    def test_lambda1_nontrivial_formula(self):
        for a, b in [(0.0, 1.0), (0.5, 0.8), (0.1, 2.0)]:
            geo = TorusGeometry(LatticeBasis(a, b), SpinCharacter(0, 1))
            rep = torus_spectrum(geo, 1)
            assert abs(rep.eigenvalue(1) - math.pi / b) < 1e-12

    @pytest.mark.parametrize("chi", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_matches_oracle(self, chi):
        geo = TorusGeometry(LatticeBasis(0.31, 1.27), SpinCharacter(*chi))
        rep = torus_spectrum(geo, 20)
        got = [(e.eigenvalue, e.complex_multiplicity) for e in rep.positive_entries()]
        want = oracle_levels(geo, 20)
        assert len(got) == len(want)
        for (lg, mg), (lw, mw) in zip(got, want):
            assert abs(lg - lw) < 1e-12 * max(1.0, lw)
            assert mg == mw

    def test_multiplicity_doubling_at_coincidence(self):
        # |xi|^2 = 25 = 3^2+4^2 = 5^2+0^2 on the square trivial torus
        geo = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 0))
        rep = torus_spectrum(geo, 40)
        lam = 2 * math.pi * 5.0
        entry = [e for e in rep.positive_entries() if abs(e.eigenvalue - lam) < 1e-9]
        assert len(entry) == 1
        # (+-5,0),(0,+-5),(+-3,+-4),(+-4,+-3): 4 + 8 = 12 vectors
        assert entry[0].complex_multiplicity == 12

    def test_symmetry_about_zero(self):
        geo = TorusGeometry(LatticeBasis(0.4, 1.9), SpinCharacter(1, 1))
        rep = torus_spectrum(geo, 10)
        pos = [(e.eigenvalue, e.complex_multiplicity) for e in rep.entries if e.eigenvalue > 0]
        neg = [(-e.eigenvalue, e.complex_multiplicity) for e in rep.entries if e.eigenvalue < 0]
        assert sorted(pos) == sorted(neg)

    def test_kernel_dimension(self):
        lat = LatticeBasis(0.2, 1.5)
        assert kernel_dimension(TorusGeometry(lat, SpinCharacter(0, 0))) == 1
        assert kernel_dimension(TorusGeometry(lat, SpinCharacter(0, 1))) == 0
        assert kernel_dimension(TorusGeometry(lat, SpinCharacter(1, 1))) == 0

    def test_scaling_invariance(self):
        # c*Gamma has dual Gamma*/c: eigenvalues scale by 1/c, area by c^2,
        # normalized eigenvalues are invariant.
        a, b, c = 0.3, 1.6, 2.7
        geo = TorusGeometry(LatticeBasis(a, b), SpinCharacter(0, 0))
        rep = torus_spectrum(geo, 6)
        basis = c * geo.lattice.basis_matrix
        rows = _enumerate_general(basis, np.zeros(2), 6.0 / c, cap=2_000_000)
        norms = np.hypot(rows[:, 2], rows[:, 3])
        norms = np.sort(norms[norms > 1e-14])
        scaled_area = c * c * b
        for k, entry in enumerate(rep.positive_entries()[:4]):
            lam_scaled = 2 * math.pi * norms[sum(
                e.complex_multiplicity for e in rep.positive_entries()[:k])]
            assert abs(lam_scaled - entry.eigenvalue / c) < 1e-12
            assert abs(lam_scaled * math.sqrt(scaled_area)
                       - entry.eigenvalue * math.sqrt(b)) < 1e-12


class TestIndexings:
    def test_normalized_values(self):
        geo = TorusGeometry(LatticeBasis(0.1, 3.0), SpinCharacter(0, 0))
        assert abs(normalized(torus_spectrum(geo, 1), 1).value
                   - 2 * math.pi / math.sqrt(3.0)) < 1e-12
        geo = TorusGeometry(LatticeBasis(0.1, 3.0), SpinCharacter(0, 1))
        assert abs(normalized(torus_spectrum(geo, 1), 1).value
                   - math.pi / math.sqrt(3.0)) < 1e-12
        assert abs(normalized(sphere_spectrum(1), 1).value - 2 * math.sqrt(math.pi)) < 1e-14

    def test_squared_index_kernel(self):
        geo = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 0))
        rep = torus_spectrum(geo, 3)
        assert squared_index(rep, 1) == 0.0
        assert abs(squared_index(rep, 2) - 2 * math.pi) < 1e-12

    def test_squared_index_nontrivial(self):
        geo = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 1))
        rep = torus_spectrum(geo, 3)
        assert abs(squared_index(rep, 1) - math.pi) < 1e-12

    def test_squared_monotone(self):
        rep = torus_spectrum(TorusGeometry(LatticeBasis(0.2, 1.4), SpinCharacter(1, 0)), 8)
        total = sum(2 * e.quaternionic_multiplicity for e in rep.positive_entries())
        seq = [squared_index(rep, k) ** 2 for k in range(1, total + 1)]
        assert all(x <= y + 1e-12 for x, y in zip(seq, seq[1:]))

    def test_index_beyond(self):
        rep = torus_spectrum(TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 0)), 2)
        with pytest.raises(IndexBeyondComputed):
            normalized(rep, 1000)
        with pytest.raises(IndexBeyondComputed):
            squared_index(rep, 1000)


class TestSphereSpectrum:
    def test_structure(self):
        rep = sphere_spectrum(4)
        pos = rep.positive_entries()
        assert [e.eigenvalue for e in pos] == [1.0, 2.0, 3.0, 4.0]
        assert [e.complex_multiplicity for e in pos] == [2, 4, 6, 8]
        assert rep.kernel_quaternionic_dim == 0
        assert abs(rep.area - 4 * math.pi) < 1e-15
        assert abs(normalized(rep, 1).value - 2 * math.sqrt(math.pi)) < 1e-14


class TestReportFromEigenvalues:
    def test_grouping(self):
        vals = np.array([-2.0, -2.0, -1.0, 0.0, 0.0, 1.0, 2.0, 2.0])
        rep = report_from_eigenvalues(vals, area=1.0, kernel_tol=1e-10)
        assert rep.kernel_quaternionic_dim == 1
        assert [(e.eigenvalue, e.complex_multiplicity) for e in rep.entries] == [
            (-2.0, 2), (-1.0, 1), (0.0, 2), (1.0, 1), (2.0, 2)]
        assert rep.eigenvalue(1) == 1.0
