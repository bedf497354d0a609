"""Complex linear-algebra primitives and ground-truth test matrices.

Matrices are plain ``numpy.ndarray`` (dense) or ``scipy.sparse`` objects.
Sparse matrices handed across module boundaries are canonical COO: duplicates
summed, explicit zeros dropped, entries sorted by ``(row, col)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq


SINGULAR_RTOL = 1e-14


@dataclass(frozen=True)
class EigenSystem:
    """A diagonalizable matrix together with its known decomposition.

    ``matrix = eigvecs @ diag(eigvals) @ inv(eigvecs)``; the columns of
    ``eigvecs`` have unit 2-norm.
    """

    matrix: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    cond_e: float
    is_normal: bool

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def residuals(self) -> np.ndarray:
        """Per-eigenpair residual ``||M E_j - lambda_j E_j||``."""
        r = self.matrix @ self.eigvecs - self.eigvecs * self.eigvals[None, :]
        return np.linalg.norm(r, axis=0)

    def distinct_eigvals(self, tol: float = 1e-9) -> np.ndarray:
        out: list[complex] = []
        for lam in self.eigvals:
            if all(abs(lam - mu) > tol for mu in out):
                out.append(complex(lam))
        return np.array(out, dtype=complex)

    def mixture(self, beta=None) -> "InputState":
        """The state ``sum_j beta_j E_j`` (uniform ``beta`` by default), normalized."""
        if beta is None:
            beta = np.full(self.n, 1 / np.sqrt(self.n), dtype=complex)
        return InputState.prepare(self.eigvecs @ np.asarray(beta, dtype=complex))


@dataclass(frozen=True)
class InputState:
    amplitudes: np.ndarray
    norm: float

    @classmethod
    def prepare(cls, vector) -> "InputState":
        v = np.asarray(vector, dtype=complex).ravel()
        nrm = float(np.linalg.norm(v))
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amplitudes=v / nrm, norm=1.0)


def as_dense(m) -> np.ndarray:
    if sp.issparse(m):
        return np.asarray(m.toarray(), dtype=complex)
    return np.asarray(m, dtype=complex)


def as_sparse(m) -> sp.coo_matrix:
    """Canonical COO form of ``m`` (sorted, deduplicated, no stored zeros)."""
    a = sp.csr_matrix(m, dtype=complex)
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return a.tocoo()


def triplets(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = as_sparse(m)
    return c.row.copy(), c.col.copy(), c.data.copy()


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def _normalized_columns(e: np.ndarray) -> np.ndarray:
    return e / np.linalg.norm(e, axis=0)[None, :]


def make_eigensystem(n: int, spectrum, target_cond: float, seed: int) -> EigenSystem:
    """Build ``M = E diag(spectrum) E^-1`` with ``kappa(E)`` close to ``target_cond``.

    ``E`` is ``U diag(s) V`` for Haar-random unitaries ``U``, ``V`` and a
    geometric singular-value ramp ``s_i = c^(-i/(n-1))``, followed by column
    normalization. The ramp ratio ``c`` is solved for so that the normalized
    ``E`` has the requested condition number. For ``n == 1`` the condition
    number is necessarily 1 and ``target_cond`` is ignored.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if target_cond < 1:
        raise ValueError(f"target_cond must be >= 1, got {target_cond}")
    lam = np.asarray(spectrum, dtype=complex).ravel()
    if lam.size != n:
        raise ValueError(f"spectrum has {lam.size} entries, expected {n}")

    if n == 1:
        e = np.ones((1, 1), dtype=complex)
        return EigenSystem(np.diag(lam).astype(complex), e, lam, 1.0, True)

    rng = np.random.default_rng(seed)
    u = random_unitary(n, rng)
    v = random_unitary(n, rng)
    ramp = np.arange(n) / (n - 1)

    def build(log_c: float) -> np.ndarray:
        return _normalized_columns(u @ (np.exp(-log_c * ramp)[:, None] * v))

    if target_cond == 1:
        e = u @ v
        m = e @ np.diag(lam) @ e.conj().T
        return EigenSystem(m, e, lam, condition_number(e), True)

    def gap(log_c: float) -> float:
        return np.log(condition_number(build(log_c))) - np.log(target_cond)

    hi = max(1.0, np.log(target_cond))
    while gap(hi) < 0:
        hi *= 2
        if hi > 200:
            raise RuntimeError("could not bracket the requested condition number")
    e = build(brentq(gap, 0.0, hi, xtol=1e-12))
    m = np.linalg.solve(e.T, (e * lam[None, :]).T).T
    return EigenSystem(m, e, lam, condition_number(e), False)


def make_normal(n: int, spectrum, seed: int) -> EigenSystem:
    """Normal matrix ``U diag(spectrum) U^H`` with Haar-random ``U``."""
    return make_eigensystem(n, spectrum, 1.0, seed)


def _require_square(m) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")


def gershgorin_bound(m) -> float:
    """``max(1, max_i sum_j |m_ij|)``, an upper bound on every ``|lambda_j|``."""
    _require_square(m)
    if sp.issparse(m):
        rows = np.asarray(abs(sp.csr_matrix(m)).sum(axis=1)).ravel()
    else:
        rows = np.abs(np.asarray(m)).sum(axis=1)
    return float(max(1.0, rows.max(initial=0.0)))


def kron(a, b):
    """Kronecker product; sparse if either factor is sparse."""
    if sp.issparse(a) or sp.issparse(b):
        return as_sparse(sp.kron(sp.csr_matrix(a), sp.csr_matrix(b)))
    return np.kron(np.asarray(a), np.asarray(b))


def condition_number(m) -> float:
    """Ratio of extreme singular values; ``inf`` for numerically singular input."""
    _require_square(m)
    s = np.linalg.svd(as_dense(m), compute_uv=False)
    if s[0] == 0 or s[-1] < SINGULAR_RTOL * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def commutator_norm(m) -> float:
    d = as_dense(m)
    return float(np.linalg.norm(d @ d.conj().T - d.conj().T @ d, 2))


def is_normal(m, rtol: float = 1e-10) -> bool:
    d = as_dense(m)
    scale = np.linalg.norm(d, 2) ** 2
    return commutator_norm(d) <= rtol * max(scale, 1e-300)
