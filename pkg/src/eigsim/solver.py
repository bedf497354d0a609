"""Solving the encoded block systems and auditing their truncation error."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import expm

from .core import EigenSystem, as_dense
from .encoder import BlockSystem, EncodingParams, build_euler, taylor_error_bound, taylor_trunc

RESIDUAL_RTOL = 1e-10


class PreconditionError(ValueError):
    """An input violates the assumptions a computation relies on."""


@dataclass(frozen=True)
class BlockSolution:
    """Solution of ``C_{m,k} x = b`` split into ``n``-vectors.

    ``blocks[i]`` is block ``i = p*(k+1) + q``; ``trajectory[p]`` is
    ``x_{p,0}`` for ``p = 0..m``.
    """

    blocks: np.ndarray
    params: EncodingParams
    residual: float = float("nan")

    @property
    def k(self) -> int:
        return self.params.k

    def block(self, p: int, q: int) -> np.ndarray:
        if p == self.params.m and q != 0:
            raise IndexError("the final segment only has q = 0")
        return self.blocks[p * (self.k + 1) + q]

    @property
    def trajectory(self) -> np.ndarray:
        return self.blocks[:: self.k + 1]

    @property
    def total_norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    @property
    def trajectory_norm(self) -> float:
        return float(np.linalg.norm(self.trajectory))

    @property
    def ancilla_zero_mass(self) -> float:
        """Weight of the ``q = 0`` blocks in the normalized solution."""
        return (self.trajectory_norm / self.total_norm) ** 2


def _strict_lower_rows(mat: sp.csr_matrix, n: int) -> list[sp.csr_matrix]:
    eye = sp.identity(mat.shape[0], dtype=complex, format="csr")
    low = (mat - eye).tocoo()
    if np.any(low.col // n >= low.row // n):
        raise ValueError("matrix is not block unit-lower-triangular")
    low = low.tocsr()
    return [low[i * n:(i + 1) * n] for i in range(mat.shape[0] // n)]


def forward_substitute(mat, rhs: np.ndarray, n: int) -> np.ndarray:
    """Block forward substitution for a unit block-lower-triangular matrix.

    ``rhs`` may be a vector or an ``(N, r)`` array of right-hand sides.
    """
    mat = sp.csr_matrix(mat)
    rows = _strict_lower_rows(mat, n)
    b = np.asarray(rhs, dtype=complex)
    x = np.zeros_like(b)
    for i, low in enumerate(rows):
        sl = slice(i * n, (i + 1) * n)
        x[sl] = b[sl] - low @ x
    return x


def solve_block_system(system: BlockSystem, method: str = "forward") -> BlockSolution:
    """Solve a ``C_{m,k}`` system exactly.

    ``method="forward"`` walks the block rows in order; ``"triangular"`` hands
    the (scalar lower-triangular) matrix to SciPy and is kept as a cross-check.
    """
    if system.kind != "cmk":
        raise ValueError("solve_block_system expects a C_{m,k} system")
    mat, b, n = system.matrix, system.rhs, system.inner_dim
    if mat.shape[0] != b.shape[0]:
        raise ValueError(f"matrix has {mat.shape[0]} rows but rhs has {b.shape[0]}")
    if method == "forward":
        x = forward_substitute(mat, b, n)
    elif method == "triangular":
        x = spla.spsolve_triangular(sp.csr_matrix(mat), b, lower=True, unit_diagonal=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(mat @ x - b) / max(np.linalg.norm(x), 1e-300)
    return BlockSolution(x.reshape(-1, n), system.params, float(res))


def recurrence_oracle(a, x0, params: EncodingParams) -> BlockSolution:
    """Blocks from ``x_{p,q} = A^q/q! x_{p,0}`` and ``x_{p,0} = T_k(A) x_{p-1,0}``.

    Uses dense matrix powers and never forms ``C_{m,k}``.
    """
    a = as_dense(a)
    n = a.shape[0]
    m, k = params.m, params.k
    powers = [np.eye(n, dtype=complex)]
    for q in range(1, k + 1):
        powers.append(powers[-1] @ a / q)
    step = sum(powers)

    out = np.zeros((params.n_blocks, n), dtype=complex)
    x = np.asarray(x0, dtype=complex).ravel()
    for p in range(m):
        for q in range(k + 1):
            out[p * (k + 1) + q] = powers[q] @ x
        x = step @ x
    out[m * (k + 1)] = x
    return BlockSolution(out, params, 0.0)


@dataclass
class BoundRow:
    check: str
    p: int | None
    measured: float
    bound: float
    status: str  # "pass" | "fail" | "vacuous"


@dataclass
class BoundReport:
    eigenvalue: float
    params: dict
    rows: list[BoundRow] = field(default_factory=list)

    def add(self, check: str, p, measured: float, bound: float, vacuous: bool = False):
        if vacuous:
            status = "vacuous"
        else:
            status = "pass" if measured <= bound else "fail"
        self.rows.append(BoundRow(check, p, float(measured), float(bound), status))

    def by_check(self, check: str) -> list[BoundRow]:
        return [r for r in self.rows if r.check == check]

    @property
    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.rows)

    def to_dict(self) -> dict:
        return {"eigenvalue": self.eigenvalue, "params": self.params,
                "rows": [asdict(r) for r in self.rows]}


def _matching_eigenpair(es: EigenSystem, x0: np.ndarray) -> int:
    overlaps = np.abs(es.eigvecs.conj().T @ x0)
    j = int(np.argmax(overlaps))
    e = es.eigvecs[:, j]
    coef = np.vdot(e, x0)
    if np.linalg.norm(x0 - coef * e) > 1e-10 * np.linalg.norm(x0):
        raise PreconditionError("input state is not a single eigenvector")
    return j


def check_truncation_bounds(es: EigenSystem, sol: BlockSolution,
                            params: EncodingParams) -> BoundReport:
    """Measure the truncated-Taylor trajectory against its error bounds.

    ``sol`` must solve ``C_{m,k}(2 pi i dt M) x = |0>|E_j>`` for a unit
    eigenvector ``E_j`` of ``es.matrix`` with real eigenvalue. Rows:

    * ``step_error`` (per ``p``): ``||x(t_p) - x_{p,0}||`` against
      ``(1 + e/(k+1)!)^p - 1``.
    * ``step_norm`` (per ``p``): ``| ||x_{p,0}|| - 1 |`` against the same.
    * ``state_distance``: distance between the normalized exact and
      truncated trajectories against
      ``2 sqrt(m+1) ((1+e/(k+1)!)^m - 1) / sqrt(2 - (1+e/(k+1)!)^m)``;
      ``vacuous`` when the square root has no positive real value.
    * ``norm_identity``: ``| ||x||^2 - e^{2 pi lam dt} S - ||x_{m,0}||^2 |``
      against ``e/(k+1)!`` where ``S = sum_{p<m} ||x_{p,0}||^2``.
    * ``norm_identity_taylor``: ``| ||x||^2 - T_k(2 pi lam dt) S - ||x_{m,0}||^2 |``
      relative to ``||x||^2``, against ``1e-12``.
    * ``norm_identity_exact``: the same with the true block weight
      ``sum_q |z|^{2q}/(q!)^2`` (``z = 2 pi i lam dt``), against ``1e-12``.
    * ``inverse_norm``: ``||x||`` against ``3 kappa(E) sqrt(k) m``.
    """
    lam_all = es.eigvals
    if np.max(np.abs(lam_all.imag)) > 1e-12:
        raise PreconditionError("bounds require a real spectrum")
    x0 = sol.block(0, 0)
    j = _matching_eigenpair(es, x0)
    lam = float(lam_all[j].real)
    if 2 * math.pi * params.dt * abs(lam) >= 1:
        raise PreconditionError(
            f"2*pi*dt*|lambda| = {2 * math.pi * params.dt * abs(lam):.4f} is not < 1")
    if abs(np.linalg.norm(x0) - 1) > 1e-12:
        raise PreconditionError("input eigenvector must have unit norm")

    m, k, dt = params.m, params.k, params.dt
    growth = 1 + taylor_error_bound(k)
    traj = sol.trajectory
    exact = np.exp(2j * np.pi * lam * dt * np.arange(m + 1))[:, None] * x0[None, :]
    report = BoundReport(lam, params.to_dict())

    for p in range(1, m + 1):
        bound = growth**p - 1
        report.add("step_error", p, np.linalg.norm(exact[p] - traj[p]), bound)
        report.add("step_norm", p, abs(np.linalg.norm(traj[p]) - 1), bound)

    gm = growth**m
    dist = np.linalg.norm(exact / np.linalg.norm(exact) - traj / np.linalg.norm(traj))
    if gm >= 2:
        report.add("state_distance", m, dist, float("inf"), vacuous=True)
    else:
        report.add("state_distance", m, dist, 2 * math.sqrt(m + 1) * (gm - 1) / math.sqrt(2 - gm))

    total_sq = sol.total_norm**2
    head = float(np.sum(np.abs(traj[:m]) ** 2))
    tail = float(np.linalg.norm(traj[m]) ** 2)
    r = 2 * math.pi * lam * dt
    report.add("norm_identity", None, abs(total_sq - math.exp(r) * head - tail),
               taylor_error_bound(k))
    taylor_w = taylor_trunc(r, k).real
    report.add("norm_identity_taylor", None,
               abs(total_sq - taylor_w * head - tail) / total_sq, 1e-12)
    exact_w = sum(r ** (2 * q) / math.factorial(q) ** 2 for q in range(k + 1))
    report.add("norm_identity_exact", None,
               abs(total_sq - exact_w * head - tail) / total_sq, 1e-12)
    report.add("inverse_norm", None, sol.total_norm, 3 * es.cond_e * math.sqrt(k) * m)
    return report


def euler_trajectory(mat, x0, m: int, dt: float) -> np.ndarray:
    """States ``x(t_0), ..., x(t_m)`` from the Euler block system."""
    system = build_euler(mat, m, dt, x0)
    x = spla.spsolve(sp.csc_matrix(system.matrix), system.rhs)
    x0 = np.asarray(x0, dtype=complex).ravel()
    return np.vstack([x0[None, :], np.asarray(x).reshape(m, -1)])


@dataclass
class EulerCheck:
    steps: list[int]
    errors: list[float]
    slopes: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


def euler_convergence(mat, x0, t_final: float, m0: int = 16, halvings: int = 4) -> EulerCheck:
    """Error at ``t_final`` against ``exp(2 pi i M t) x0`` while halving ``dt``.

    ``slopes`` are ``log2(err_i / err_{i+1})``; a first-order scheme gives ~1.
    """
    d = as_dense(mat)
    x0 = np.asarray(x0, dtype=complex).ravel()
    target = expm(2j * np.pi * t_final * d) @ x0
    steps, errors = [], []
    for h in range(halvings + 1):
        m = m0 * 2**h
        traj = euler_trajectory(d, x0, m, t_final / m)
        steps.append(m)
        errors.append(float(np.linalg.norm(traj[-1] - target)))
    slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(halvings)]
    return EulerCheck(steps, errors, slopes)
