import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from eigsim.encoder import (DIM_CAP_ENV, DimensionOverflow, EncodingParams, build_cmk,
                            build_euler, cmk_entry, matrix_oracle, row_support, sparsity,
                            split_index, taylor_error_bound, taylor_trunc)


def params(m, k):
    return EncodingParams(rho=1.0, eps=0.5, dt=0.1, m=m, k=k)


class TestTaylorTrunc:
    @pytest.mark.parametrize("z", [0, 1.5, -2j, 3 + 4j])
    def test_order_zero_is_one(self, z):
        assert taylor_trunc(z, 0) == 1

    def test_imaginary_unit_order_two(self):
        assert taylor_trunc(1j, 2) == pytest.approx(0.5 + 1j)

    def test_error_bound_on_unit_interval(self):
        r = np.linspace(-1, 1, 1000)
        err = np.abs(taylor_trunc(1j * r, 4) - np.exp(1j * r))
        assert err.max() <= math.e / 120

    @settings(max_examples=50)
    @given(st.floats(-1, 1), st.integers(0, 12))
    def test_error_bound_any_order(self, r, k):
        assert abs(taylor_trunc(1j * r, k) - np.exp(1j * r)) <= taylor_error_bound(k) + 1e-15

    def test_elementwise(self):
        out = taylor_trunc(np.array([0.0, 1.0]), 3)
        assert np.allclose(out, [1, 1 + 1 + 0.5 + 1 / 6])

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            taylor_trunc(1.0, -1)


class TestEncodingParams:
    def test_real_defaults(self):
        p = EncodingParams.for_real(1.0, 1 / 64)
        assert p.dt == 0.5
        assert p.m == 64
        assert p.k >= 6
        assert p.factorial_condition_ok
        assert p.d == p.m * (p.k + 1)

    def test_complex_defaults(self):
        p = EncodingParams.for_complex(2.0, 1 / 32)
        assert p.dt == 0.5
        assert p.m == 64
        assert p.k >= 12

    def test_overrides(self):
        p = EncodingParams.for_real(1.0, 1 / 64, m=8, k=3, dt=0.1)
        assert (p.m, p.k, p.dt) == (8, 3, 0.1)

    def test_none_override_keeps_default(self):
        assert EncodingParams.for_real(1.0, 1 / 64, m=None).m == 64

    @pytest.mark.parametrize("kwargs", [
        dict(rho=0.5, eps=0.1, dt=1, m=1, k=1),
        dict(rho=1, eps=1.5, dt=1, m=1, k=1),
        dict(rho=1, eps=0.1, dt=0, m=1, k=1),
        dict(rho=1, eps=0.1, dt=1, m=0, k=1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EncodingParams(**kwargs)

    def test_step_condition(self):
        p = EncodingParams(rho=1, eps=0.1, dt=0.1, m=1, k=1)
        assert p.step_condition == pytest.approx(0.2 * math.pi)
        assert p.step_condition_ok


class TestBuildCmk:
    def test_scalar_m2_k2_pattern(self):
        a = 0.7 - 0.2j
        mat = build_cmk(np.array([[a]]), params(2, 2)).matrix.toarray()
        assert mat.shape == (7, 7)
        assert np.array_equal(np.diag(mat), np.ones(7))
        off = mat - np.eye(7)
        assert off[1, 0] == -a and off[2, 1] == -a / 2
        assert off[4, 3] == -a and off[5, 4] == -a / 2
        assert np.array_equal(off[3, :3], [-1, -1, -1])
        assert np.array_equal(off[6, 3:6], [-1, -1, -1])
        assert np.count_nonzero(off) == 10

    def test_zero_generator_leaves_accumulation_only(self):
        m, k, n = 3, 2, 2
        mat = build_cmk(np.zeros((n, n)), params(m, k)).matrix.toarray()
        off = mat - np.eye(mat.shape[0])
        rows, cols = np.nonzero(off)
        assert np.all(off[rows, cols] == -1)
        assert np.all(rows // n % (k + 1) == 0)
        assert rows.size == m * (k + 1) * n

    def test_sparse_row_count(self):
        a = np.array([[1, 2], [3, 4]], dtype=complex)
        row_max, _ = sparsity(build_cmk(a, params(4, 3)).matrix)
        assert row_max <= 2 + 3 + 2

    def test_rhs_layout(self):
        x0 = np.array([1, 2j])
        sysm = build_cmk(np.eye(2), params(2, 1), x0)
        assert np.array_equal(sysm.rhs[:2], x0)
        assert not np.any(sysm.rhs[2:])
        assert sysm.n_blocks == 5

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setenv(DIM_CAP_ENV, "10")
        with pytest.raises(DimensionOverflow):
            build_cmk(np.eye(2), params(2, 2))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            build_cmk(np.ones((2, 3)), params(1, 1))

    def test_rejects_wrong_x0(self):
        with pytest.raises(ValueError):
            build_cmk(np.eye(2), params(1, 1), np.ones(3))


class TestCmkEntry:
    def test_diagonal_is_one(self):
        a = matrix_oracle(np.ones((2, 2)))
        for i in range(2 * 7):
            assert cmk_entry(a, i, i, params(2, 2), 2) == 1

    def test_accumulation_entry(self):
        p = params(2, 2)
        n = 1
        assert cmk_entry(matrix_oracle(np.eye(1)), 3, 1, p, n) == -1

    @pytest.mark.parametrize("sparse_input", [False, True])
    def test_agrees_with_materialized(self, rng, sparse_input):
        n, p = 3, params(3, 2)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a[0, 1] = 0
        mat = build_cmk(a, p).matrix.toarray()
        oracle = matrix_oracle(sp.csr_matrix(a) if sparse_input else a)
        size = p.n_blocks * n
        got = np.array([[cmk_entry(oracle, i, j, p, n) for j in range(size)]
                        for i in range(size)])
        assert np.array_equal(got, mat)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            cmk_entry(matrix_oracle(np.eye(1)), 7, 0, params(2, 2), 1)

    def test_split_index(self):
        assert split_index(0, 2, 2) == (0, 0, 0)
        assert split_index(7, 2, 2) == (1, 0, 1)


class TestRowSupport:
    def test_matches_materialized(self, rng):
        n, p = 4, params(3, 2)
        a = sp.random(n, n, density=0.5, random_state=1, format="csr") + sp.identity(n)
        mat = build_cmk(a, p).matrix
        a_cols = lambda i: list(a[i].indices)
        for row in range(mat.shape[0]):
            assert row_support(a_cols, row, p, n) == sorted(mat[row].indices.tolist())


class TestSparsity:
    @pytest.mark.parametrize("s", [1, 2, 3])
    @pytest.mark.parametrize("k", [2, 5])
    @pytest.mark.parametrize("m", [2, 6])
    def test_bound(self, s, k, m):
        n = 6
        rows = np.repeat(np.arange(n), s)
        cols = (rows + np.tile(np.arange(s), n)) % n
        a = sp.csr_matrix((np.ones(n * s), (rows, cols)), shape=(n, n))
        row_max, col_max = sparsity(build_cmk(a, params(m, k)).matrix)
        assert row_max == max(s + 1, k + 2)
        assert col_max == s + 2
        assert max(row_max, col_max) <= s + k + 2


class TestBuildEuler:
    def test_zero_matrix_bidiagonal(self):
        mat = build_euler(np.zeros((2, 2)), 2, 0.1).matrix.toarray()
        expected = np.block([[np.eye(2), np.zeros((2, 2))], [-np.eye(2), np.eye(2)]])
        assert np.array_equal(mat, expected)

    def test_scalar_closed_form(self):
        from scipy.sparse.linalg import spsolve
        lam, dt, m = 0.3, 0.05, 3
        sysm = build_euler(np.array([[lam]]), m, dt, [1.0])
        x = spsolve(sysm.matrix.tocsc(), sysm.rhs)
        expected = (1 - 2j * np.pi * lam * dt) ** -(np.arange(m) + 1.0)
        assert np.allclose(x, expected, rtol=1e-12)

    def test_kind(self):
        assert build_euler(np.eye(1), 1, 0.1).kind == "euler"

    def test_rejects_m_zero(self):
        with pytest.raises(ValueError):
            build_euler(np.eye(1), 0, 0.1)
