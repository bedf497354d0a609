import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigsim.encoder import EncodingParams, build_cmk
from eigsim.phase import (PhaseDistribution, abs_oracle, decode_estimate, dilation, find_peaks,
                          inverse_fourier_decode, qpe_register_bits, qpe_simulate, signed_phase,
                          sve_inverse, sve_simulate)
from eigsim.solver import solve_block_system


def point_mass(size, index):
    mass = np.zeros(size)
    mass[index] = 1.0
    return PhaseDistribution(size, mass, 1.0, None, 1.0)


class TestInverseFourierDecode:
    def test_grid_frequency_concentrates(self):
        m = 15
        v = np.array([0.6, 0.8j])
        traj = np.exp(2j * np.pi * np.arange(m + 1) * 3 / (m + 1))[:, None] * v[None, :]
        dist = inverse_fourier_decode(traj)
        assert dist.mass[3] == pytest.approx(1.0, abs=1e-12)
        assert dist.mass.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("lam", [0.3, -0.2, 0.05, -0.45])
    def test_scalar_solution_peak(self, lam):
        p = EncodingParams.for_real(1.0, 1 / 64)
        sol = solve_block_system(build_cmk(np.array([[2j * np.pi * lam * p.dt]]), p, [1.0]))
        dist = inverse_fourier_decode(sol.trajectory)
        size = p.m + 1
        target = round(size * lam * p.dt) % size
        peak = int(np.argmax(dist.mass))
        assert min((peak - target) % size, (target - peak) % size) <= 1

    def test_two_eigenvalue_mixture(self):
        m = 63
        l = np.arange(m + 1)
        traj = (np.exp(2j * np.pi * l * 0.1)[:, None] * np.array([1, 0]) / math.sqrt(2)
                + np.exp(2j * np.pi * l * -0.27)[:, None] * np.array([0, 1]) / math.sqrt(2))
        dist = inverse_fourier_decode(traj)
        peaks = find_peaks(dist.mass, 1, 0.4)
        assert len(peaks) == 2
        assert all(p.window_mass >= 0.4 for p in peaks)

    def test_scalar_trajectory_accepted(self):
        dist = inverse_fourier_decode(np.ones(8))
        assert dist.mass[0] == pytest.approx(1)
        assert dist.conditioned.shape == (8, 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            inverse_fourier_decode(np.zeros((0, 2)))

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            inverse_fourier_decode(np.zeros(4))

    def test_drop_conditioned(self):
        assert inverse_fourier_decode(np.ones(4), keep_conditioned=False).conditioned is None


class TestFindPeaks:
    def test_plateau_resolves_low_index(self):
        mass = np.array([0, 0.5, 0.5, 0, 0, 0, 0, 0])
        (pk,) = find_peaks(mass, 1, 0.5)
        assert pk.index == 1
        assert pk.position == pytest.approx(1.5)

    def test_wraps_around(self):
        mass = np.array([0.6, 0, 0, 0, 0, 0, 0, 0.4])
        (pk,) = find_peaks(mass, 1, 0.9)
        assert pk.index == 0
        assert pk.window_mass == pytest.approx(1.0)
        shift = math.sqrt(0.4) / (math.sqrt(0.6) + math.sqrt(0.4))
        assert pk.position == pytest.approx(8 - shift)

    def test_merge_adjacent(self):
        mass = np.array([0, 0.45, 0.0, 0.55, 0, 0, 0, 0, 0, 0])
        assert len(find_peaks(mass, 1, 0.3, merge_distance=2)) == 1
        assert len(find_peaks(mass, 0, 0.3, merge_distance=1)) == 2

    def test_uniform_has_no_peaks(self):
        assert find_peaks(np.full(16, 1 / 16), 1, 0.5) == []


class TestSignedPhase:
    @pytest.mark.parametrize("pos, size, expected", [
        (0, 64, 0.0), (16, 64, 0.25), (32, 64, 0.5), (48, 64, -0.25), (62, 64, -2 / 64),
    ])
    def test_values(self, pos, size, expected):
        assert signed_phase(pos, size) == pytest.approx(expected)

    @settings(max_examples=100)
    @given(st.floats(-1000, 1000, allow_nan=False), st.integers(2, 4096))
    def test_range(self, pos, size):
        phi = signed_phase(pos, size)
        assert -0.5 < phi <= 0.5 + 1e-9


class TestDecodeEstimate:
    def test_uniform_gives_nothing(self):
        dist = PhaseDistribution(64, np.full(64, 1 / 64), 1.0, None, 1.0)
        assert decode_estimate(dist, 0.5, rho=1.0) == []

    def test_wrap_rule_negative(self):
        (est,) = decode_estimate(point_mass(64, 62), 0.5, rho=1.0)
        assert est.value == pytest.approx(-1 / 16)
        assert est.sign == -1
        assert est.register_index == 62

    def test_positive(self):
        (est,) = decode_estimate(point_mass(64, 5), 0.5)
        assert est.value == pytest.approx(2 * 5 / 64)
        assert est.sign == 1

    def test_rho_violation(self):
        with pytest.raises(ValueError):
            decode_estimate(point_mass(64, 30), 0.5, rho=0.5)

    def test_threshold_scales_with_expected_count(self):
        mass = np.zeros(64)
        mass[[5, 20, 40]] = [0.4, 0.3, 0.3]
        dist = PhaseDistribution(64, mass, 1.0, None, 1.0)
        assert len(decode_estimate(dist, 0.5, n_expected=1)) == 0
        assert len(decode_estimate(dist, 0.5, n_expected=3)) == 3


class TestAbsOracle:
    def test_examples(self):
        assert abs_oracle(5, 64) == 5
        assert abs_oracle(60, 64) == 4
        assert abs_oracle(32, 64) == 32

    @pytest.mark.parametrize("size", [8, 64, 100])
    def test_idempotent(self, size):
        for l in range(size):
            f = abs_oracle(l, size)
            assert abs_oracle(f, size) == f

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            abs_oracle(64, 64)


class TestQPE:
    def test_register_bits(self):
        assert qpe_register_bits(1 / 64, 0.1) == 6 + 3

    def test_identity(self):
        dist = qpe_simulate(np.eye(2), [1, 0], 4)
        assert dist.mass[0] == pytest.approx(1)

    def test_exact_phase(self):
        q = 16
        dist = qpe_simulate(lambda v: np.exp(2j * np.pi * 5 / q) * v, [1.0], 4)
        assert dist.mass[5] == pytest.approx(1)

    def test_off_grid_window_captures_kernel_mass(self):
        q_bits = 6
        q = 2**q_bits
        thetas = np.array([0.1234, 0.6789])
        u = np.diag(np.exp(2j * np.pi * thetas))
        dist = qpe_simulate(u, np.array([1, 1]) / math.sqrt(2), q_bits)
        for th in thetas:
            lo = int(math.floor(th * q))
            branch = dist.mass[[lo, (lo + 1) % q]].sum() * 2
            assert branch >= 8 / np.pi**2

    def test_rejects_non_unitary_matrix(self):
        with pytest.raises(ValueError):
            qpe_simulate(np.diag([1.0, 0.5]), [1, 1], 3)

    def test_rejects_non_unitary_callable(self):
        with pytest.raises(ValueError):
            qpe_simulate(lambda v: 1.1 * v, [1.0], 3)

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            qpe_simulate(np.eye(1), [1.0], 0)


class TestSVE:
    def test_scalar_labels(self):
        st_ = sve_simulate(np.eye(1), np.array([1.0, 0.0]), 1 / 64)
        assert np.allclose(st_.values, [1.0, -1.0])
        assert np.allclose(st_.abs_values, [1.0, 1.0])

    def test_swap_matrix(self):
        m = np.array([[0, 1], [1, 0]])
        st_ = sve_simulate(m, np.ones(4) / 2, 1 / 64)
        assert np.allclose(np.sort(st_.values), [-1, -1, 1, 1])
        assert not st_.collisions

    def test_round_trip(self, rng):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        state = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        state /= np.linalg.norm(state)
        assert np.linalg.norm(sve_inverse(sve_simulate(m, state, 1 / 64)) - state) <= 1e-10

    def test_basis_diagonalizes_dilation(self, rng):
        m = rng.standard_normal((3, 3))
        st_ = sve_simulate(m, np.zeros(6), 1 / 64)
        s = st_.singular_values
        d = st_.basis.conj().T @ dilation(m) @ st_.basis
        assert np.allclose(d, np.diag(np.concatenate([s, -s])), atol=1e-12)

    def test_label_accuracy(self, rng):
        m = rng.standard_normal((5, 5))
        st_ = sve_simulate(m, np.zeros(10), 1 / 64)
        s = st_.singular_values
        assert np.all(np.abs(st_.abs_values - np.concatenate([s, s])) <= 1 / 128 + 1e-12)

    def test_collisions_flagged(self):
        st_ = sve_simulate(np.diag([1.0, 1.001]), np.zeros(4), 1 / 8)
        assert st_.collisions

    def test_label_mass_sums_to_norm(self, rng):
        m = rng.standard_normal((3, 3))
        v = rng.standard_normal(6)
        v /= np.linalg.norm(v)
        assert sum(sve_simulate(m, v, 1 / 64).label_mass().values()) == pytest.approx(1)

    def test_bad_state_length(self):
        with pytest.raises(ValueError):
            sve_simulate(np.eye(2), np.ones(3), 1 / 64)
