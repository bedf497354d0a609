import math

import numpy as np
import pytest

from eigsim.algorithms import (NonNormalError, SpectrumError, algorithm1_real,
                               algorithm2_complex, algorithm3_normal, amplification_rounds,
                               eigensystem_from_matrix, ground_truth_deltas, paired_state,
                               polar_phase_operator)
from eigsim.core import make_eigensystem, make_normal, random_unitary


def circular_distance(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


class TestHelpers:
    def test_ground_truth_deltas_dedupes(self):
        assert ground_truth_deltas([0.1, 0.5], [0.1, 0.1, 0.45]) == pytest.approx([0, 0.05])

    def test_ground_truth_deltas_empty(self):
        assert ground_truth_deltas([], [1.0]) == [float("inf")]

    @pytest.mark.parametrize("p, rounds", [(1.0, 1), (0.25, 2), (0.01, 10), (0.0101, 10)])
    def test_amplification_rounds(self, p, rounds):
        assert amplification_rounds(p) == rounds

    def test_paired_state_normalized(self):
        es = make_eigensystem(3, [0.1, 0.2j, -0.3], 4, seed=2)
        v = paired_state(es)
        assert v.shape == (9,)
        assert np.linalg.norm(v) == pytest.approx(1)

    def test_eigensystem_from_matrix_rejects_jordan_block(self):
        with pytest.raises(SpectrumError):
            eigensystem_from_matrix(np.array([[0.1, 1.0], [0.0, 0.1]]))


class TestAlgorithm1:
    def test_zero_matrix(self):
        es = make_eigensystem(1, [0.0], 1, seed=0)
        res = algorithm1_real(es, eps=1 / 32)
        assert res.values.tolist() == [0.0]
        assert res.ancilla_zero_mass >= 1 / (res.params.m + 1)

    def test_rotated_diagonal_signs(self):
        u = random_unitary(2, np.random.default_rng(4))
        mat = u @ np.diag([0.25, -0.25]) @ u.conj().T
        res = algorithm1_real(mat, np.array([1.0, 0.3]), eps=1 / 32, rho=1.0)
        vals = np.sort(res.values)
        assert np.all(np.abs(vals - [-0.25, 0.25]) <= 1 / 32)
        assert [e.sign for e in sorted(res.estimates, key=lambda e: e.value)] == [-1, 1]

    def test_factory_kappa5(self):
        lam = [0.1, 0.2, 0.3, 0.4]
        es = make_eigensystem(4, lam, 5, seed=3)
        res = algorithm1_real(es, eps=1 / 64, rho=1.0)
        assert len(res.estimates) == 4
        assert max(ground_truth_deltas(res.values, lam)) <= 1 / 64
        p = res.params
        assert res.ancilla_zero_mass >= (1 / (3 * es.cond_e * math.sqrt(p.k) * p.m)) ** 2
        assert res.mass_lower_bound == pytest.approx((3 * es.cond_e * math.sqrt(p.k) * p.m) ** -2)

    @pytest.mark.parametrize("seed", range(20))
    def test_single_eigenvector(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        lam = rng.uniform(-0.5, 0.5, n)
        es = make_eigensystem(n, lam, rng.uniform(1, 8), seed)
        j = int(rng.integers(n))
        res = algorithm1_real(es, es.eigvecs[:, j], eps=1 / 64, rho=1.0, n_expected=1)
        assert len(res.estimates) == 1
        assert abs(res.values[0] - lam[j]) <= 1 / 64

    def test_default_rho_is_gershgorin(self):
        es = make_eigensystem(2, [0.5, -0.5], 1, seed=0)
        res = algorithm1_real(es)
        assert res.params.rho == pytest.approx(max(1.0, np.abs(es.matrix).sum(axis=1).max()))

    def test_complex_spectrum_rejected(self):
        with pytest.raises(SpectrumError):
            algorithm1_real(make_eigensystem(2, [0.1, 0.2j], 1, seed=0))

    def test_rho_below_spectrum_rejected(self):
        with pytest.raises(SpectrumError):
            algorithm1_real(make_eigensystem(1, [2.0], 1, seed=0), rho=1.0)

    def test_bare_matrix_needs_state(self):
        with pytest.raises(ValueError):
            algorithm1_real(np.eye(2))


class TestAlgorithm2:
    def test_imaginary_scalar(self):
        res = algorithm2_complex(np.array([[1j]]), eps=1 / 32)
        (est,) = res.estimates
        assert abs(est.re) <= 1 / 32
        assert abs(est.im - 1) <= 1 / 32

    def test_diagonal_complex(self):
        lam = np.array([0.3 + 0.2j, -0.1 - 0.4j])
        res = algorithm2_complex(np.diag(lam), eps=1 / 32)
        assert len(res.estimates) == 2
        for l in lam:
            assert any(abs(v.real - l.real) <= 1 / 32 and abs(v.imag - l.imag) <= 1 / 32
                       for v in res.values)
        assert min(res.stage_probs) >= res.mass_lower_bound

    def test_stage1_matches_real_pipeline(self):
        lam = [0.1, -0.2]
        es = make_eigensystem(2, lam, 2, seed=1)
        rho = 3.0
        one = algorithm1_real(es, eps=1 / 32, rho=rho)
        two = algorithm2_complex(es, eps=1 / 32, rho=rho, imaginary=False)
        cell = 1 / (two.params.dt * (two.params.m + 1))
        assert len(one.values) == len(two.values) == 2
        for a, b in zip(np.sort(one.values), np.sort(two.values.real)):
            assert abs(a - b) <= cell + 1e-12

    def test_rotated_spread_spectrum_reports_growth(self):
        es = make_eigensystem(2, [0.3 + 0.2j, -0.1 - 0.4j], 1.5, seed=0)
        res = algorithm2_complex(es, eps=1 / 32)
        assert res.cross_growth_log10 > 16

    def test_joint_distribution_kept(self):
        res = algorithm2_complex(np.array([[0.1 + 0.1j]]), eps=1 / 32, keep_joint=True)
        assert res.joint.sum() == pytest.approx(1)

    def test_rho_too_small(self):
        with pytest.raises(SpectrumError):
            algorithm2_complex(np.array([[0.6j]]), rho=1.0)

    def test_non_diagonalizable(self):
        with pytest.raises(SpectrumError):
            algorithm2_complex(np.array([[0.1, 1.0], [0.0, 0.1]]))


class TestAlgorithm3:
    def test_identity(self):
        res = algorithm3_normal(np.eye(3))
        assert res.pairs.tolist() == [[1.0, 0.0]]

    def test_diag_i(self):
        (est,) = algorithm3_normal(np.array([[1j]])).estimates
        assert est.sigma == pytest.approx(1, abs=1 / 64)
        assert circular_distance(est.theta, 0.25) <= 1 / 64

    def test_random_4x4(self):
        sigma = np.array([0.9, 0.5, 0.7, 0.3])
        theta = np.array([0.1, 0.7, 0.35, 0.9])
        es = make_normal(4, sigma * np.exp(2j * np.pi * theta), seed=9)
        res = algorithm3_normal(es.matrix)
        assert res.unitarity_error <= 1e-10
        assert len(res.estimates) == 4
        for s, th in zip(sigma, theta):
            assert any(abs(e.sigma - s) <= 1 / 64 and circular_distance(e.theta, th) <= 1 / 64
                       for e in res.estimates)

    def test_w_top_left_block_is_polar_factor(self, rng):
        es = make_normal(3, np.array([0.4, 0.8j, -0.6]), seed=3)
        w, _ = polar_phase_operator(es.matrix, 1 / 64)
        u, _, vh = np.linalg.svd(es.matrix)
        assert np.allclose(w[:3, :3], vh.conj().T @ u.conj().T, atol=1e-12)

    def test_non_normal_rejected(self):
        with pytest.raises(NonNormalError) as info:
            algorithm3_normal(np.array([[0.1, 1.0], [0.0, 0.2]]))
        assert info.value.commutator_norm > 0.1

    def test_zero_eigenvalue_skipped_in_phase_check(self):
        res = algorithm3_normal(np.diag([0.0, 0.5]))
        assert res.phase_error <= 1e-8
