import math

import numpy as np
import pytest
import scipy.sparse
import scipy.sparse.linalg

from spindirac.errors import EmptyBasis, NotNormalized
from spindirac.lattice import LatticeBasis, SpinCharacter, TorusGeometry
from spindirac.spectra import normalized, torus_spectrum
from spindirac.torus import (
    FourierField,
    assemble_flat_dirac,
    derivative_branches,
    eigenspace,
    eigenvalue_derivative,
    flat_eigenspinor,
    quaternionic_partner,
    solve_conformal,
    weight_matrix,
)

SQUARE = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 0))


def cos_x_field(geometry, amplitude):
    return FourierField(geometry, {(1, 0): amplitude / 2, (-1, 0): amplitude / 2})


class TestFourierField:
    def test_real_values(self):
        f = cos_x_field(SQUARE, 0.4)
        vals = f.values((32, 32))
        x = np.arange(32) / 32
        assert np.allclose(vals, 0.4 * np.cos(2 * np.pi * x)[:, None], atol=1e-12)

    def test_hermitian_enforced(self):
        with pytest.raises(ValueError):
            FourierField(SQUARE, {(1, 0): 1.0, (-1, 0): 2.0})

    def test_variance(self):
        f = cos_x_field(SQUARE, 0.4)
        assert abs(f.variance() - 2 * (0.2) ** 2) < 1e-15

    def test_grid_invariant(self):
        with pytest.raises(ValueError):
            FourierField(SQUARE, {(3, 0): 0.1, (-3, 0): 0.1}, grid=(4, 4))


class TestFlatAssembly:
    def test_block_symbol_entries(self):
        prob = assemble_flat_dirac(SQUARE, 1.2)
        for i, xi in enumerate(prob.basis):
            want = 2j * np.pi * (xi.u - 1j * xi.v)
            assert abs(prob.A[2 * i, 2 * i + 1] - want) < 1e-14
            assert abs(prob.A[2 * i + 1, 2 * i] - np.conj(want)) < 1e-14

    def test_square_cutoff_15(self):
        prob = assemble_flat_dirac(SQUARE, 1.5)
        vals = np.sort(np.linalg.eigvalsh(prob.A))
        lam = 2 * np.pi
        want = sorted([0.0, 0.0] + [lam] * 4 + [-lam] * 4 + [lam * math.sqrt(2)] * 4
                      + [-lam * math.sqrt(2)] * 4)
        assert np.allclose(vals, want, atol=1e-10)

    def test_empty_basis(self):
        geo = TorusGeometry(LatticeBasis(0, 1), SpinCharacter(0, 1))
        with pytest.raises(EmptyBasis):
            assemble_flat_dirac(geo, 0.2)


class TestWeightMatrix:
    def test_zero_field_identity(self):
        prob = assemble_flat_dirac(SQUARE, 1.5)
        W = weight_matrix(FourierField.zero(SQUARE), prob.basis)
        assert np.array_equal(W, np.eye(len(prob.basis)))

    def test_constant_field(self):
        prob = assemble_flat_dirac(SQUARE, 1.5)
        W = weight_matrix(FourierField(SQUARE, {(0, 0): 0.7}), prob.basis, exponent=2.0)
        assert np.allclose(W, math.exp(1.4) * np.eye(len(prob.basis)), atol=1e-15)

    def test_against_quadrature_oracle(self):
        # direct Riemann sums of e^w e^{-2 pi i (dm s1 + dn s2)} on an odd grid
        geo = TorusGeometry(LatticeBasis(0.3, 1.4), SpinCharacter(0, 1))
        omega = FourierField(geo, {(1, 0): 0.05, (-1, 0): 0.05,
                                   (0, 1): 0.1j, (0, -1): -0.1j})
        prob = assemble_flat_dirac(geo, 1.0)
        W = weight_matrix(omega, prob.basis)
        n = 243
        s1 = (np.arange(n) + 0.5) / n
        s2 = (np.arange(n) + 0.5) / n
        S1, S2 = np.meshgrid(s1, s2, indexing="ij")
        w = np.exp(0.05 * 2 * np.cos(2 * np.pi * S1) + 0.2 * -np.sin(2 * np.pi * S2))
        for i, xi in enumerate(prob.basis):
            for j, xj in enumerate(prob.basis):
                dm = xi.index[0] - xj.index[0]
                dn = xi.index[1] - xj.index[1]
                oracle = np.mean(w * np.exp(-2j * np.pi * (dm * S1 + dn * S2)))
                assert abs(W[i, j] - oracle) < 1e-10

    def test_hermitian_positive(self):
        geo = SQUARE
        omega = cos_x_field(geo, 0.5)
        prob = assemble_flat_dirac(geo, 2.5)
        W = weight_matrix(omega, prob.basis)
        assert np.allclose(W, W.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(W).min() > 0


class TestSolveConformal:
    def test_flat_reproduces_exact(self):
        cutoff = 4.0
        report, _ = solve_conformal(SQUARE, None, cutoff)
        exact = torus_spectrum(SQUARE, 40)
        window = math.pi * cutoff
        got = [(e.eigenvalue, e.complex_multiplicity) for e in report.positive_entries()
               if e.eigenvalue <= window]
        want = [(e.eigenvalue, e.complex_multiplicity) for e in exact.positive_entries()
                if e.eigenvalue <= window]
        assert len(got) == len(want)
        for (lg, mg), (lw, mw) in zip(got, want):
            assert abs(lg - lw) < 1e-10
            assert mg == mw

    def test_constant_omega_scales(self):
        c = 0.37
        omega = FourierField(SQUARE, {(0, 0): c})
        report, _ = solve_conformal(SQUARE, omega, 2.2)
        flat, _ = solve_conformal(SQUARE, None, 2.2)
        assert abs(report.eigenvalue(1) - flat.eigenvalue(1) * math.exp(-c)) < 1e-10
        assert abs(normalized(report, 1).value - normalized(flat, 1).value) < 1e-9

    def test_spectral_symmetry_random_omega(self):
        rng = np.random.default_rng(5)
        coeffs = {}
        for key in [(1, 0), (0, 1), (1, 1)]:
            c = 0.05 * (rng.standard_normal() + 1j * rng.standard_normal())
            coeffs[key] = c
            coeffs[(-key[0], -key[1])] = np.conj(c)
        omega = FourierField(SQUARE, coeffs)
        report, spinors = solve_conformal(SQUARE, omega, 3.0)
        vals = np.sort([s.eigenvalue for s in spinors])
        assert np.max(np.abs(vals + vals[::-1])) < 1e-8

    def test_kernel_persists_under_omega(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            coeffs = {}
            for key in [(1, 0), (0, 1), (2, 1)]:
                c = 0.1 * (rng.standard_normal() + 1j * rng.standard_normal())
                coeffs[key] = c
                coeffs[(-key[0], -key[1])] = np.conj(c)
            omega = FourierField(SQUARE, coeffs)
            _, spinors = solve_conformal(SQUARE, omega, 2.4)
            vals = np.abs(np.array([s.eigenvalue for s in spinors]))
            assert np.sort(vals)[0] < 1e-10 and np.sort(vals)[1] < 1e-10

    def test_quaternionic_pairing_residual(self):
        omega = cos_x_field(SQUARE, 0.3)
        _, spinors = solve_conformal(SQUARE, omega, 2.4)
        prob = assemble_flat_dirac(SQUARE, 2.4)
        M = np.kron(weight_matrix(omega, prob.basis), np.eye(2))
        for s in spinors[:6]:
            partner = quaternionic_partner(s)
            v = np.ravel(np.column_stack([partner.plus_component, partner.minus_component]))
            res = np.linalg.norm(prob.A @ v - s.eigenvalue * (M @ v))
            assert res < 1e-8

    def test_cutoff_cauchy(self):
        omega = cos_x_field(SQUARE, 0.1)
        r1, _ = solve_conformal(SQUARE, omega, 3.0)
        r2, _ = solve_conformal(SQUARE, omega, 6.0)
        assert abs(r1.eigenvalue(1) - r2.eigenvalue(1)) < 1e-6


class TestEigenvalueDerivative:
    def test_constant_direction(self):
        omega = cos_x_field(SQUARE, 0.2)
        _, spinors = solve_conformal(SQUARE, omega, 2.4)
        lam1 = min(s.eigenvalue for s in spinors if s.eigenvalue > 1e-6)
        pair = [s for s in spinors if s.eigenvalue == lam1][0]
        direction = FourierField(SQUARE, {(0, 0): 0.9})
        got = eigenvalue_derivative(SQUARE, omega, direction, pair)
        assert abs(got + lam1 * 0.9) < 1e-9

    def test_plane_wave_mean_zero(self):
        spinor = flat_eigenspinor(SQUARE, torus_spectrum(SQUARE, 1) and
                                  __import__("spindirac.lattice", fromlist=["DualVector"]
                                             ).DualVector(0.0, 1.0, index=(0, 1)))
        direction = cos_x_field(SQUARE, 1.0)
        got = eigenvalue_derivative(SQUARE, FourierField.zero(SQUARE), direction, spinor)
        assert abs(got) < 1e-12

    def test_not_normalized(self):
        spinor = flat_eigenspinor(SQUARE, __import__("spindirac.lattice",
                                                     fromlist=["DualVector"]
                                                     ).DualVector(0.0, 1.0, index=(0, 1)))
        bad = type(spinor)(spinor.basis, 2 * spinor.plus_component,
                           2 * spinor.minus_component, spinor.eigenvalue,
                           spinor.geometry, spinor.omega)
        with pytest.raises(NotNormalized):
            eigenvalue_derivative(SQUARE, FourierField.zero(SQUARE),
                                  cos_x_field(SQUARE, 1.0), bad)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        a = float(rng.uniform(0, 0.5))
        b = float(rng.uniform(1.0, 2.0))
        geo = TorusGeometry(LatticeBasis(a, b), SpinCharacter(0, 0))
        omega = FourierField(geo, _random_coeffs(rng, 0.1))
        direction = FourierField(geo, _random_coeffs(rng, 1.0, mean=rng.uniform(0.4, 1.0)))
        _assert_fd_match(geo, omega, direction, cutoff=2.5 / b + 1.5)

    def test_degenerate_square_torus(self):
        # lambda_1 = 2pi has two quaternionic pairs; the perturbation matrix
        # spectrum must match the sorted FD branch derivatives.
        rng = np.random.default_rng(3)
        omega = FourierField.zero(SQUARE)
        direction = FourierField(SQUARE, _random_coeffs(rng, 0.8, mean=0.5))
        _assert_fd_match(SQUARE, omega, direction, cutoff=2.4)


def _random_coeffs(rng, amplitude, mean=0.0, keys=((1, 0), (0, 1), (1, 1))):
    coeffs = {(0, 0): complex(mean)}
    for key in keys:
        c = amplitude * (rng.standard_normal() + 1j * rng.standard_normal()) / 4
        coeffs[key] = c
        coeffs[(-key[0], -key[1])] = np.conj(c)
    return coeffs


def _assert_fd_match(geo, omega, direction, cutoff, t=1e-4, rtol=1e-4):
    report, spinors = solve_conformal(geo, omega, cutoff)
    lam1 = report.eigenvalue(1)
    group = eigenspace([s for s in spinors if s.eigenvalue > 0], lam1, rtol=1e-8)
    pred = derivative_branches(geo, omega, direction, group)

    def positive_sorted(field):
        rep, sp = solve_conformal(geo, field, cutoff)
        return np.sort([s.eigenvalue for s in sp if s.eigenvalue > 1e-8])

    base = positive_sorted(omega)
    i0 = int(np.searchsorted(base, lam1 - 1e-8 * max(1.0, lam1)))
    idx = slice(i0, i0 + len(group))
    plus = positive_sorted(omega.plus(direction.scaled(t)))[idx]
    minus = positive_sorted(omega.plus(direction.scaled(-t)))[idx]
    # analytic branches cross at t = 0: within the level, the branch ascending
    # at +t is descending at -t, so pair sorted(+t) with reversed sorted(-t)
    fd = np.sort((plus - minus[::-1]) / (2 * t))
    scale = max(np.max(np.abs(pred)), 1e-3 * lam1)
    assert np.max(np.abs(fd - pred)) < rtol * scale, (fd, pred)


class TestRealSpaceOracle:
    def test_lambda1_cross_check(self):
        """Independent dense-grid central-difference discretization, Richardson
        extrapolated in h^2, must agree with the spectral solver to 1e-4."""
        amplitude = 0.1
        omega = cos_x_field(SQUARE, amplitude)
        report, _ = solve_conformal(SQUARE, omega, 5.0)
        lam_spectral = report.eigenvalue(1)
        lambar_spectral = normalized(report, 1).value

        def fd_lambda1(n):
            h = 1.0 / n
            ones = np.ones(n)
            dx1 = scipy.sparse.diags([ones[:-1], -ones[:-1]], [1, -1], format="lil")
            dx1[0, -1] = -1.0
            dx1[-1, 0] = 1.0
            dx1 = (dx1 / (2 * h)).tocsr()
            eye = scipy.sparse.identity(n, format="csr")
            Dx = scipy.sparse.kron(dx1, eye)
            Dy = scipy.sparse.kron(eye, dx1)
            off = (Dx - 1j * Dy).tocsr()
            A = scipy.sparse.bmat([[None, off], [-(Dx + 1j * Dy), None]], format="csc")
            x = np.arange(n) / n
            w = amplitude * np.cos(2 * np.pi * x)[:, None] * np.ones(n)[None, :]
            e_half = np.exp(-0.5 * np.ravel(w))
            S = scipy.sparse.diags(np.concatenate([e_half, e_half]))
            B = (S @ A @ S).tocsc()
            vals = scipy.sparse.linalg.eigsh(B, k=8, sigma=lam_spectral,
                                             return_eigenvectors=False)
            vals = np.sort(vals[vals > 1e-6])
            return vals[0]

        n1, n2 = 64, 96
        l1, l2 = fd_lambda1(n1), fd_lambda1(n2)
        lam_fd = (n2 ** 2 * l2 - n1 ** 2 * l1) / (n2 ** 2 - n1 ** 2)
        x = (np.arange(1024) + 0.5) / 1024
        area = float(np.mean(np.exp(2 * amplitude * np.cos(2 * np.pi * x))))
        assert abs(lam_fd - lam_spectral) < 1e-4
        assert abs(lam_fd * math.sqrt(area) - lambar_spectral) < 1e-4
