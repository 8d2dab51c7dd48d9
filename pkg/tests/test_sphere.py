import math

import numpy as np
import pytest

from spindirac.errors import QuadratureInsufficient
from spindirac.sphere import (
    BarSweepReport,
    SphereConformalFactor,
    assemble_round,
    bar_sweep,
    build_basis,
    first_normalized_eigenvalue,
    random_conformal_factor,
    rotate_factor,
    solve_conformal_sphere,
    wigner_d,
    wigner_d_dtheta,
)
from spindirac.spectra import normalized, sphere_spectrum

BOUND = 2 * math.sqrt(math.pi)


class TestWignerD:
    def test_half_integer_closed_forms(self):
        th = np.linspace(0.05, 3.1, 9)
        assert np.allclose(wigner_d(0.5, 0.5, 0.5, th), np.cos(th / 2), atol=1e-14)
        assert np.allclose(wigner_d(0.5, 0.5, -0.5, th), -np.sin(th / 2), atol=1e-14)
        assert np.allclose(wigner_d(0.5, -0.5, 0.5, th), np.sin(th / 2), atol=1e-14)

    def test_integer_closed_forms(self):
        th = np.linspace(0.05, 3.1, 9)
        assert np.allclose(wigner_d(1, 0, 0, th), np.cos(th), atol=1e-14)
        assert np.allclose(wigner_d(1, 1, 0, th), -np.sin(th) / math.sqrt(2), atol=1e-14)
        assert np.allclose(wigner_d(2, 0, 0, th), 0.5 * (3 * np.cos(th) ** 2 - 1), atol=1e-13)

    @pytest.mark.parametrize("jmm", [(0.5, 0.5, -0.5), (1.5, 0.5, 0.5),
                                     (2.5, -1.5, 0.5), (3, 2, 0)])
    def test_derivative_matches_fd(self, jmm):
        j, m, mp = jmm
        th = np.linspace(0.2, 2.9, 7)
        h = 1e-6
        fd = (wigner_d(j, m, mp, th + h) - wigner_d(j, m, mp, th - h)) / (2 * h)
        assert np.max(np.abs(fd - wigner_d_dtheta(j, m, mp, th))) < 1e-8

    def test_unitarity_rows(self):
        th = 1.234
        for j in (0.5, 1.5, 3):
            ms = np.arange(-j, j + 1)
            for m in ms:
                total = sum(wigner_d(j, m, mp, th) ** 2 for mp in ms)
                assert abs(total - 1.0) < 1e-12


class TestAssembleRound:
    def test_jmax_half(self):
        dirac = assemble_round(0.5)
        vals = np.sort(np.linalg.eigvalsh(dirac.A))
        assert np.allclose(vals, [-1, -1, 1, 1], atol=1e-10)

    def test_block_multiplicities(self):
        rep, _ = solve_conformal_sphere(None, 3.5)
        got = [(round(e.eigenvalue), e.complex_multiplicity) for e in rep.positive_entries()]
        want = [(e.eigenvalue, e.complex_multiplicity)
                for e in sphere_spectrum(4).positive_entries()]
        assert got == [(int(l), m) for l, m in want]

    def test_spectrum_symmetric(self):
        dirac = assemble_round(2.5)
        vals = np.sort(np.linalg.eigvalsh(dirac.A))
        assert np.max(np.abs(vals + vals[::-1])) < 1e-10

    def test_orthonormality(self):
        basis = build_basis(3.5)
        assert basis.orthonormality_residual() < 1e-10

    def test_quadrature_insufficient(self):
        basis = build_basis(3.5, n_theta=3, n_phi=5)
        with pytest.raises(QuadratureInsufficient):
            solve_conformal_sphere(SphereConformalFactor({(1, 0): 0.1}), 3.5, basis)


class TestConformalSolve:
    def test_round_anchor(self):
        assert abs(first_normalized_eigenvalue(None, 3.5) - BOUND) < 1e-8

    def test_constant_factor_invariance(self):
        lam = first_normalized_eigenvalue(SphereConformalFactor({(0, 0): 0.7}), 3.5)
        assert abs(lam - BOUND) < 1e-8

    def test_band1_perturbation_above_bound(self):
        lam = first_normalized_eigenvalue(SphereConformalFactor({(1, 0): 0.2}), 7.5)
        assert lam >= BOUND - 1e-6

    def test_band_exceeds_jmax(self):
        with pytest.raises(ValueError):
            solve_conformal_sphere(SphereConformalFactor({(4, 0): 0.1}), 2.5)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(12)
        omega = random_conformal_factor(rng, 2, 0.25)
        rotated = rotate_factor(omega, 0.9, 0.7, 1.8)
        lam = first_normalized_eigenvalue(omega, 6.5)
        lam_rot = first_normalized_eigenvalue(rotated, 6.5)
        assert abs(lam - lam_rot) < 1e-8

    def test_area_with_factor(self):
        # the (0,0) coefficient multiplies Y_00 = 1/sqrt(4 pi)
        rep, _ = solve_conformal_sphere(SphereConformalFactor({(0, 0): 0.3}), 2.5)
        const = 0.3 / math.sqrt(4 * math.pi)
        assert abs(rep.area - 4 * math.pi * math.exp(2 * const)) < 1e-9

    def test_kernel_free(self):
        rep, _ = solve_conformal_sphere(SphereConformalFactor({(1, 1): 0.1j}), 4.5)
        assert rep.kernel_quaternionic_dim == 0

    def test_perturbation_trace_zero_for_mean_zero(self):
        # first-order splitting of the round lambda_1 eigenspace is symmetric:
        # the degenerate eigenspace has constant density, so the perturbation
        # trace is proportional to the mean of the direction field.
        eps = 1e-5
        direction = SphereConformalFactor({(1, 0): 1.0})
        lp = first_normalized_eigenvalue(
            SphereConformalFactor({(1, 0): eps}), 6.5)
        lm = first_normalized_eigenvalue(
            SphereConformalFactor({(1, 0): -eps}), 6.5)
        assert abs((lp - lm) / (2 * eps)) < 1e-6
        assert direction.band == 1


class TestBarSweep:
    def test_small_sweep_no_violations(self):
        report = bar_sweep(8, band=3, amplitude=0.3, seed=7)
        assert isinstance(report, BarSweepReport)
        assert report.violations == 0
        assert report.min_lambda_bar >= BOUND - report.tolerance

    def test_round_sample_flagged_equality(self):
        report = bar_sweep(2, band=2, amplitude=0.2, seed=1)
        assert report.samples[0].equality_case
        assert abs(report.samples[0].lambda_bar_1 - BOUND) < 1e-8

    def test_zero_amplitude_all_round(self):
        report = bar_sweep(3, band=3, amplitude=0.0, seed=4)
        for sample in report.samples:
            assert abs(sample.lambda_bar_1 - BOUND) < 1e-8

    def test_determinism(self):
        r1 = bar_sweep(3, band=2, amplitude=0.25, seed=9)
        r2 = bar_sweep(3, band=2, amplitude=0.25, seed=9)
        assert [s.lambda_bar_1 for s in r1.samples] == [s.lambda_bar_1 for s in r2.samples]
