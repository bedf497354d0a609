"""Block linear systems that encode a linear ODE ``dx/dt = A x / dt``.

``build_cmk`` assembles the truncated-Taylor system ``C_{m,k}(A)`` whose
solution blocks ``x_{p,0}`` equal ``T_k(A)^p x(0)``. The generator ``A`` is
passed already scaled (e.g. ``2*pi*1j*dt*M``). ``build_euler`` assembles the
first-order Euler system used only as a cross-check.

Block index ``p*(k+1) + q`` (``0 <= p < m``, ``0 <= q <= k``) plus the final
block ``m*(k+1)``; within a block the inner index runs over ``0..n-1``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .core import as_sparse

DEFAULT_DIM_CAP = 2**20
DIM_CAP_ENV = "EIGSIM_DIM_CAP"


def dim_cap() -> int:
    raw = os.environ.get(DIM_CAP_ENV)
    return int(raw) if raw else DEFAULT_DIM_CAP


class DimensionOverflow(ValueError):
    """Raised when a block system would exceed the configured row cap."""


def taylor_trunc(z, k: int):
    """``sum_{j=0..k} z**j / j!`` (works elementwise on arrays)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    term = np.ones_like(np.asarray(z, dtype=complex))
    total = term.copy()
    for j in range(1, k + 1):
        term = term * z / j
        total = total + term
    return total if total.ndim else complex(total)


def taylor_error_bound(k: int) -> float:
    """``e / (k+1)!``: bound on ``|T_k(ir) - e^{ir}|`` for real ``|r| < 1``."""
    return math.e / math.factorial(k + 1)


def _k_for(eps: float, m: int, base_k: int) -> int:
    # (k+1)! >= m^2/eps is what the truncation argument needs; bump k until it holds
    k = max(base_k, 0)
    while math.factorial(k + 1) < m * m / eps:
        k += 1
    return k


@dataclass(frozen=True)
class EncodingParams:
    """Discretization parameters for ``C_{m,k}``.

    ``rho`` bounds the eigenvalue magnitudes, ``eps`` is the target
    precision, ``dt`` the time step, ``m`` the number of steps and ``k`` the
    Taylor order.
    """

    rho: float
    eps: float
    dt: float
    m: int
    k: int

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.m < 1 or self.k < 0:
            raise ValueError("need m >= 1 and k >= 0")

    @property
    def d(self) -> int:
        return self.m * (self.k + 1)

    @property
    def n_blocks(self) -> int:
        return self.d + 1

    @property
    def step_condition(self) -> float:
        """``2*pi*dt*rho``; the per-step truncation bounds assume this is < 1."""
        return 2 * math.pi * self.dt * self.rho

    @property
    def step_condition_ok(self) -> bool:
        return self.step_condition < 1

    @property
    def factorial_condition_ok(self) -> bool:
        return math.factorial(self.k + 1) >= self.m**2 / self.eps

    @classmethod
    def for_real(cls, rho: float, eps: float, **overrides) -> "EncodingParams":
        """Real-spectrum defaults: ``dt = 1/(2 rho)``, ``m = ceil(rho/eps)``,
        ``k = ceil(log2(rho/eps))`` raised until ``(k+1)! >= m^2/eps``."""
        m = math.ceil(rho / eps)
        k = _k_for(eps, m, math.ceil(math.log2(rho / eps)))
        p = cls(rho=rho, eps=eps, dt=1 / (2 * rho), m=m, k=k)
        return _apply_overrides(p, overrides)

    @classmethod
    def for_complex(cls, rho: float, eps: float, **overrides) -> "EncodingParams":
        """Two-stage defaults: ``dt = 1/rho``, ``m = ceil(rho/eps)``,
        ``k = 2*ceil(log2(rho/eps))`` raised until ``(k+1)! >= m^2/eps``."""
        m = math.ceil(rho / eps)
        k = _k_for(eps, m, 2 * math.ceil(math.log2(rho / eps)))
        p = cls(rho=rho, eps=eps, dt=1 / rho, m=m, k=k)
        return _apply_overrides(p, overrides)

    def to_dict(self) -> dict:
        return {"rho": self.rho, "eps": self.eps, "dt": self.dt, "m": self.m,
                "k": self.k, "d": self.d}


def _apply_overrides(p: EncodingParams, overrides: dict) -> EncodingParams:
    kw = {key: val for key, val in overrides.items() if val is not None}
    return replace(p, **kw) if kw else p


@dataclass(frozen=True)
class BlockSystem:
    """Sparse block system ``matrix @ x = rhs`` with ``inner_dim`` sized blocks."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    params: EncodingParams | None
    inner_dim: int
    kind: str = "cmk"

    @property
    def n_blocks(self) -> int:
        return self.matrix.shape[0] // self.inner_dim


def _check_cap(rows: int) -> None:
    cap = dim_cap()
    if rows > cap:
        raise DimensionOverflow(f"block system needs {rows} rows, cap is {cap} "
                                f"(set {DIM_CAP_ENV} to raise it)")


def _rhs(x0, n: int, n_blocks: int) -> np.ndarray:
    if x0 is None:
        x0 = np.zeros(n, dtype=complex)
    x0 = np.asarray(x0, dtype=complex).ravel()
    if x0.size != n:
        raise ValueError(f"initial vector has length {x0.size}, expected {n}")
    b = np.zeros(n_blocks * n, dtype=complex)
    b[:n] = x0
    return b


def build_cmk(a, params: EncodingParams, x0=None) -> BlockSystem:
    """Assemble ``C_{m,k}(a)`` and the right-hand side ``|0..0>|x0>``.

    Three pieces, nothing else: identity on every block row; ``-a/q`` from
    block ``p(k+1)+q-1`` into block ``p(k+1)+q`` for ``q = 1..k``; ``-I`` from
    each block ``p(k+1)+q`` (``q = 0..k``) into block ``(p+1)(k+1)``.
    """
    a = sp.csr_matrix(a, dtype=complex)
    if a.shape[0] != a.shape[1]:
        raise ValueError("generator must be square")
    n = a.shape[0]
    m, k = params.m, params.k
    nb = params.n_blocks
    _check_cap(nb * n)

    eye_n = sp.identity(n, dtype=complex, format="csr")
    blocks = sp.lil_matrix((nb, nb), dtype=complex)
    pieces = [sp.kron(sp.identity(nb, dtype=complex), eye_n)]

    taylor = sp.lil_matrix((nb, nb), dtype=complex)
    for p in range(m):
        base = p * (k + 1)
        for q in range(1, k + 1):
            taylor[base + q, base + q - 1] = -1.0 / q
        for q in range(k + 1):
            blocks[(p + 1) * (k + 1), base + q] = -1.0
    pieces.append(sp.kron(taylor.tocsr(), a))
    pieces.append(sp.kron(blocks.tocsr(), eye_n))

    mat = sp.csr_matrix(pieces[0] + pieces[1] + pieces[2])
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return BlockSystem(mat, _rhs(x0, n, nb), params, n, "cmk")


def split_index(index: int, n: int, k: int) -> tuple[int, int, int]:
    """Global index -> ``(p, q, r)``."""
    block, r = divmod(index, n)
    p, q = divmod(block, k + 1)
    return p, q, r


def cmk_entry(a_entry: Callable[[int, int], complex], row: int, col: int,
              params: EncodingParams, n: int) -> complex:
    """Entry ``(row, col)`` of ``C_{m,k}(A)`` from index arithmetic alone.

    ``a_entry(i, j)`` returns ``A[i, j]`` and is queried at most once. The
    three contributions live on disjoint index sets, so at most one applies.
    """
    size = params.n_blocks * n
    if not (0 <= row < size and 0 <= col < size):
        raise IndexError(f"index ({row}, {col}) outside a {size}x{size} system")
    m, k = params.m, params.k
    p1, q1, r1 = split_index(row, n, k)
    p2, q2, r2 = split_index(col, n, k)

    if p1 == p2 and q1 == q2 and r1 == r2:
        return 1.0 + 0j
    if p2 <= m - 1 and q2 <= k - 1 and p1 == p2 and q1 == q2 + 1:
        return -complex(a_entry(r1, r2)) / (q2 + 1)
    if p2 <= m - 1 and r1 == r2 and p1 == p2 + 1 and q1 == 0:
        return -1.0 + 0j
    return 0j


def matrix_oracle(a) -> Callable[[int, int], complex]:
    """Entry lookup ``(i, j) -> a[i, j]`` over a dense or sparse matrix."""
    if sp.issparse(a):
        csr = sp.csr_matrix(a)
        return lambda i, j: complex(csr[i, j])
    dense = np.asarray(a)
    return lambda i, j: complex(dense[i, j])


def row_support(a_row_cols: Callable[[int], list[int]], row: int,
                params: EncodingParams, n: int) -> list[int]:
    """Column indices of the structurally nonzero entries in ``row``.

    ``a_row_cols(i)`` lists the nonzero columns of row ``i`` of ``A`` (the
    ``l``-th nonzero lookup). The result is sorted.
    """
    k = params.k
    p, q, r = split_index(row, n, k)
    cols = {row}
    if q >= 1:
        base = (p * (k + 1) + q - 1) * n
        cols.update(base + c for c in a_row_cols(r))
    if q == 0 and p >= 1:
        start = (p - 1) * (k + 1)
        cols.update((start + qq) * n + r for qq in range(k + 1))
    return sorted(cols)


def sparsity(mat) -> tuple[int, int]:
    """Maximum nonzeros per row and per column."""
    c = sp.csr_matrix(mat)
    c.eliminate_zeros()
    rows = np.diff(c.indptr).max(initial=0)
    cols = np.diff(c.tocsc().indptr).max(initial=0)
    return int(rows), int(cols)


def build_euler(mat, m: int, dt: float, x0=None) -> BlockSystem:
    """Euler system ``(B (x) I_n - 2 pi i dt I_m (x) M) x = (x(t_0), 0, ..., 0)``.

    ``B`` is the ``m x m`` lower-bidiagonal difference matrix (1 on the
    diagonal, -1 below), so block ``l`` of the solution is
    ``(I - 2 pi i dt M)^{-(l+1)} x(t_0)``, the state at ``t_{l+1}``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    mm = sp.csr_matrix(mat, dtype=complex)
    if mm.shape[0] != mm.shape[1]:
        raise ValueError("matrix must be square")
    n = mm.shape[0]
    _check_cap(m * n)
    diff = sp.diags([np.ones(m), -np.ones(m - 1)], [0, -1], format="csr", dtype=complex)
    sys_mat = sp.kron(diff, sp.identity(n, dtype=complex)) \
        - 2j * np.pi * dt * sp.kron(sp.identity(m, dtype=complex), mm)
    sys_mat = as_sparse(sys_mat).tocsr()
    return BlockSystem(sys_mat, _rhs(x0, n, m), None, n, "euler")
