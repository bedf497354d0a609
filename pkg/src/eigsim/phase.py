"""Inverse-Fourier phase decoding, phase-estimation simulation and SVE labels.

The time register of a trajectory ``x_0, ..., x_{N-1}`` is mapped by the
unitary inverse DFT ``|l> -> N^{-1/2} sum_k e^{-2 pi i l k / N} |k>``; a
component rotating as ``e^{2 pi i l phi}`` concentrates near ``k = N phi mod N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import as_dense, gershgorin_bound

NORM_RTOL = 1e-10
SIGN_TIE_TOL = 1e-9


@dataclass(frozen=True)
class PhaseDistribution:
    """Probability mass over an ``N``-point frequency register.

    ``conditioned[k]`` is the unnormalized state left in the work register
    when frequency ``k`` is observed; ``total`` is the squared norm of the
    (post-selected) state before renormalization.
    """

    register_size: int
    mass: np.ndarray
    post_select_prob: float
    conditioned: np.ndarray | None
    total: float

    def __post_init__(self):
        if not 0 < self.post_select_prob <= 1 + 1e-12:
            raise ValueError(f"post_select_prob must be in (0, 1], got {self.post_select_prob}")


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    register_index: int
    sign: int
    mass: float


def inverse_fourier_decode(trajectory, post_select_prob: float = 1.0,
                           keep_conditioned: bool = True) -> PhaseDistribution:
    """Apply the inverse DFT across the time index of ``trajectory``.

    ``trajectory`` has shape ``(N, n)`` (or ``(N,)`` for scalars).
    """
    traj = np.asarray(trajectory, dtype=complex)
    if traj.ndim == 1:
        traj = traj[:, None]
    if traj.shape[0] == 0:
        raise ValueError("empty trajectory")
    freq = np.fft.fft(traj, axis=0, norm="ortho")
    weights = np.sum(np.abs(freq) ** 2, axis=1)
    total = float(weights.sum())
    if total == 0:
        raise ValueError("trajectory is identically zero")
    return PhaseDistribution(traj.shape[0], weights / total, float(post_select_prob),
                             freq if keep_conditioned else None, total)


@dataclass(frozen=True)
class Peak:
    index: int
    window_mass: float
    position: float  # fractional register position, modulo N


def _refine(mass: np.ndarray, l: int) -> float:
    # amplitude-ratio interpolation between the peak and its larger neighbor;
    # exact for a single tone in the large-N limit of the Fejer kernel
    n = mass.size
    left, right = mass[(l - 1) % n], mass[(l + 1) % n]
    nb, step = (right, 1) if right >= left else (left, -1)
    a, b = math.sqrt(mass[l]), math.sqrt(nb)
    if a + b == 0:
        return float(l)
    return (l + step * b / (a + b)) % n


def find_peaks(mass, half_width: int = 1, threshold: float = 0.5,
               merge_distance: int = 1) -> list[Peak]:
    """Circular local maxima whose ``+-half_width`` window holds ``>= threshold``.

    Plateaus resolve to their lowest index. A maximum within
    ``merge_distance`` bins of a heavier accepted peak is merged into it.
    Peaks come back sorted by index.
    """
    mass = np.asarray(mass, dtype=float)
    n = mass.size
    w = max(int(half_width), 0)
    left, right = np.roll(mass, 1), np.roll(mass, -1)
    cand = np.flatnonzero((mass > left) & (mass >= right))
    offsets = np.arange(-w, w + 1)
    accepted: list[Peak] = []
    for l in sorted(cand, key=lambda i: (-mass[i], i)):
        if any(min((l - p.index) % n, (p.index - l) % n) <= merge_distance
               for p in accepted):
            continue
        wm = float(mass[(l + offsets) % n].sum())
        if wm >= threshold:
            accepted.append(Peak(int(l), wm, _refine(mass, int(l))))
    return sorted(accepted, key=lambda p: p.index)


def signed_phase(position: float, size: int) -> float:
    """Register position -> phase in ``(-1/2, 1/2]``."""
    phi = (position / size) % 1.0
    return phi if phi <= 0.5 + SIGN_TIE_TOL else phi - 1.0


def decode_estimate(dist: PhaseDistribution, dt: float, rho: float | None = None,
                    eps: float | None = None, n_expected: int = 1,
                    threshold: float | None = None) -> list[SpectralEstimate]:
    """Turn peaks of ``dist`` into signed eigenvalue estimates.

    Positions in the lower half of the register decode as ``+(l/N)/dt``, the
    upper half as ``-((N-l)/N)/dt``. The window is ``+-max(1, floor(eps N dt))``
    bins and the default threshold ``1/(2 n_expected)``.
    """
    size = dist.register_size
    half = 1 if eps is None else max(1, int(math.floor(eps * size * dt)))
    thr = 1 / (2 * n_expected) if threshold is None else threshold
    out = []
    for pk in find_peaks(dist.mass, half, thr):
        value = signed_phase(pk.position, size) / dt
        if rho is not None and abs(value) > rho:
            raise ValueError(f"decoded {value} exceeds the eigenvalue bound {rho}")
        out.append(SpectralEstimate(value, pk.index, 1 if value >= 0 else -1, pk.window_mass))
    return out


def abs_oracle(l: int, register_size: int) -> int:
    """``f(l) = l`` for ``l <= Q/2`` and ``Q - l`` otherwise."""
    if not 0 <= l < register_size:
        raise ValueError(f"register index {l} outside [0, {register_size})")
    return l if 2 * l <= register_size else register_size - l


def qpe_register_bits(eps: float, delta: float = 0.1) -> int:
    """``ceil(log2(1/eps)) + ceil(log2(2 + 1/(2 delta)))``."""
    return math.ceil(math.log2(1 / eps)) + math.ceil(math.log2(2 + 1 / (2 * delta)))


def qpe_simulate(unitary_action: Callable[[np.ndarray], np.ndarray] | np.ndarray,
                 state, q_bits: int) -> PhaseDistribution:
    """Exact phase estimation with a ``2**q_bits`` register.

    Builds ``Q^{-1/2} sum_j U^j|b> (x) |j>`` and applies the inverse DFT to
    the register. A matrix argument is checked for unitarity up front; a
    callable is checked for norm preservation along the orbit.
    """
    if q_bits < 1:
        raise ValueError("q_bits must be >= 1")
    if callable(unitary_action):
        apply = unitary_action
    else:
        u = as_dense(unitary_action)
        dev = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2)
        if dev > NORM_RTOL:
            raise ValueError(f"operator is not unitary: ||U^H U - I|| = {dev:.3e}")
        apply = u.__matmul__
    q = 2**q_bits
    b = np.asarray(state, dtype=complex).ravel()
    norm0 = np.linalg.norm(b)
    traj = np.empty((q, b.size), dtype=complex)
    traj[0] = b
    for j in range(1, q):
        traj[j] = apply(traj[j - 1])
        if abs(np.linalg.norm(traj[j]) - norm0) > NORM_RTOL * max(norm0, 1.0):
            raise ValueError(f"operator changed the norm at power {j}: not unitary")
    freq = np.fft.fft(traj, axis=0, norm="ortho") / math.sqrt(q)
    weights = np.sum(np.abs(freq) ** 2, axis=1)
    total = float(weights.sum())
    return PhaseDistribution(q, weights / total, 1.0, freq, total)


@dataclass(frozen=True)
class SVEState:
    """A dilated-space state expanded in the ``w_j^+-`` basis with labels.

    Columns ``basis[:, j]`` are ``(|0>|u_j> + |1>|v_j>)/sqrt(2)`` for
    ``j < n`` and ``(|0>|u_j> - |1>|v_j>)/sqrt(2)`` for ``j >= n``;
    ``labels[j]`` is the register index holding the rounded signed singular
    value, on a ``register_size``-point grid of spacing ``scale/register_size``.
    """

    basis: np.ndarray
    coeffs: np.ndarray
    labels: np.ndarray
    register_size: int
    scale: float
    singular_values: np.ndarray
    collisions: bool

    @property
    def values(self) -> np.ndarray:
        """Signed label values ``+-sigma~``."""
        return np.array([signed_phase(l, self.register_size) for l in self.labels]) * self.scale

    @property
    def abs_values(self) -> np.ndarray:
        """``sigma~`` read through the absolute-value oracle."""
        return np.array([abs_oracle(int(l), self.register_size) for l in self.labels]) \
            * self.scale / self.register_size

    def label_mass(self) -> dict[int, float]:
        """Squared amplitude per absolute label index."""
        out: dict[int, float] = {}
        for l, c in zip(self.labels, self.coeffs):
            key = abs_oracle(int(l), self.register_size)
            out[key] = out.get(key, 0.0) + float(abs(c) ** 2)
        return out


def dilation(m) -> np.ndarray:
    """Hermitian dilation ``[[0, M], [M^H, 0]]``."""
    d = as_dense(m)
    n = d.shape[0]
    z = np.zeros((n, n), dtype=complex)
    return np.block([[z, d], [d.conj().T, z]])


def sve_basis(m) -> tuple[np.ndarray, np.ndarray]:
    """``(W, sigma)`` with ``W = [w^+ | w^-]`` from the SVD of ``m``."""
    d = as_dense(m)
    u, s, vh = np.linalg.svd(d)
    v = vh.conj().T
    top = np.hstack([u, u]) / math.sqrt(2)
    bottom = np.hstack([v, -v]) / math.sqrt(2)
    return np.vstack([top, bottom]), s


def sve_simulate(m, state, eps1: float, scale: float | None = None) -> SVEState:
    """Label each ``w^+-`` component of ``state`` with ``+-sigma`` on the ``eps1`` grid.

    Labels represent values in ``(-scale/2, scale/2]``. ``scale`` defaults to
    ``4 * gershgorin_bound(dilation(m))`` so that ``+-sigma`` stays strictly
    inside that range and the sign of every label is unambiguous. The
    register has ``2**ceil(log2(scale/eps1))`` points.
    """
    if not 0 < eps1 < 1:
        raise ValueError("eps1 must be in (0, 1)")
    big = dilation(m)
    if scale is None:
        scale = 4 * gershgorin_bound(big)
    size = 2 ** math.ceil(math.log2(scale / eps1))
    basis, sigma = sve_basis(m)
    st = np.asarray(state, dtype=complex).ravel()
    if st.size != basis.shape[0]:
        raise ValueError(f"state has length {st.size}, dilated space has {basis.shape[0]}")
    coeffs = basis.conj().T @ st
    grid = np.rint(sigma * size / scale).astype(int)
    labels = np.concatenate([grid % size, (-grid) % size])
    distinct = np.unique(np.round(sigma, 12))
    collisions = bool(np.unique(grid).size < distinct.size)
    return SVEState(basis, coeffs, labels, size, float(scale), sigma, collisions)


def sve_inverse(state: SVEState) -> np.ndarray:
    """Undo :func:`sve_simulate` (drop labels, return to the standard basis)."""
    return state.basis @ state.coeffs
