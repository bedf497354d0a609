"""Frequency leakage when the decoded eigenvalue has a nonzero imaginary part.

For ``lambda = lambda_re + i lambda_im`` the trajectory is
``e^{2 pi i l lambda_re dt} e^{2 pi l b}`` with ``b = -lambda_im dt < 0``, so the
inverse DFT no longer concentrates on one bin. With ``N = m + 1``,
``q*`` the bin just below ``N lambda_re dt`` and ``a = lambda_re dt - q*/N``,
the probability of bin ``q* + s`` is

    P_s = (1 - e^{4 pi b}) / ((1 - e^{4 pi b N}) N)
          * [(e^{2 pi b N} - 1)^2 + 4 e^{2 pi b N} sin^2(pi N u)]
          / [(e^{2 pi b} - 1)^2 + 4 e^{2 pi b} sin^2(pi u)],   u = a - s/N.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .phase import inverse_fourier_decode


@dataclass
class ComplexLeakageReport:
    a: float
    b: float
    big_c: float
    r: int
    q_star: int
    shifts: np.ndarray
    p_s: np.ndarray
    tail_measured: float
    tail_bound: float
    tail_bound_c: float
    register_size: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shifts"] = self.shifts.tolist()
        d["p_s"] = self.p_s.tolist()
        return d


def shift_range(size: int) -> np.ndarray:
    """Shifts ``s`` covering each residue mod ``size`` once, centered on 0."""
    return np.arange(-((size - 1) // 2), size // 2 + 1)


def fejer_kernel(u, size: int) -> np.ndarray:
    """``|sum_{l<N} e^{2 pi i l u}|^2 / N^2``."""
    u = np.asarray(u, dtype=float)
    num = np.sin(np.pi * size * u) ** 2
    den = size**2 * np.sin(np.pi * u) ** 2
    near = np.abs(np.sin(np.pi * u)) < 1e-12
    out = np.where(near, 1.0, num / np.where(near, 1.0, den))
    return out


def closed_form_ps(a: float, b: float, size: int, shifts) -> np.ndarray:
    """``P_s`` at the given shifts; reduces to the Fejer kernel when ``b == 0``."""
    s = np.asarray(shifts, dtype=float)
    u = a - s / size
    if b == 0:
        return fejer_kernel(u, size)
    em_b2 = math.expm1(2 * math.pi * b)
    em_bn2 = math.expm1(2 * math.pi * b * size)
    pref = math.expm1(4 * math.pi * b) / (math.expm1(4 * math.pi * b * size) * size)
    num = em_bn2**2 + 4 * math.exp(2 * math.pi * b * size) * np.sin(np.pi * size * u) ** 2
    den = em_b2**2 + 4 * math.exp(2 * math.pi * b) * np.sin(np.pi * u) ** 2
    return pref * num / den


def damped_trajectory(lambda_re: float, lambda_im: float, dt: float, m: int) -> np.ndarray:
    """``e^{2 pi i l lambda dt}`` for ``l = 0..m`` (normalization left to the decoder)."""
    l = np.arange(m + 1)
    return np.exp(2j * np.pi * l * lambda_re * dt) * np.exp(-2 * np.pi * l * lambda_im * dt)


def simulated_ps(lambda_re: float, lambda_im: float, dt: float, m: int) -> tuple[np.ndarray, int]:
    """Bin probabilities from the inverse DFT of the damped trajectory, keyed by shift."""
    size = m + 1
    dist = inverse_fourier_decode(damped_trajectory(lambda_re, lambda_im, dt, m))
    q_star = int(math.floor(lambda_re * dt * size)) % size
    shifts = shift_range(size)
    return dist.mass[(q_star + shifts) % size], q_star


def tail_bound(b: float, size: int, r: int) -> float:
    """``e^{2 pi} / (8 (r-1)) * (1 - e^{4 pi b}) N / (1 - e^{4 pi b N})``."""
    if r <= 1:
        raise ValueError("tail bound needs r >= 2")
    if b == 0:
        factor = 1.0
    else:
        factor = math.expm1(4 * math.pi * b) * size / math.expm1(4 * math.pi * b * size)
    return math.exp(2 * math.pi) / (8 * (r - 1)) * factor


def tail_bound_c(big_c: float, r: int) -> float:
    """``e^{2 pi} / (8 (r-1)) * 4 pi C / (1 - e^{-4 pi})``, valid for ``C >= 1``."""
    if r <= 1:
        raise ValueError("tail bound needs r >= 2")
    return math.exp(2 * math.pi) / (8 * (r - 1)) * 4 * math.pi * big_c / -math.expm1(-4 * math.pi)


def leakage_analysis(lambda_re: float, lambda_im: float, dt: float, m: int,
                     r: int) -> ComplexLeakageReport:
    """Closed-form leakage profile and tail bound for one complex eigenvalue.

    Requires ``lambda_im > 0`` (a decaying trajectory) with
    ``b = -lambda_im dt`` in ``[-1, 0)``, and ``r >= 2``. The tail constants
    were derived for ``m + 1`` a power of two; other sizes are accepted.
    """
    if r <= 1:
        raise ValueError(f"r must be at least 2, got {r}")
    if lambda_im <= 0:
        raise ValueError("lambda_im must be positive (shift by -i rho first)")
    b = -lambda_im * dt
    if b < -1:
        raise ValueError(f"b = {b} is below -1")
    size = m + 1
    q_star = int(math.floor(lambda_re * dt * size)) % size
    a = lambda_re * dt - math.floor(lambda_re * dt * size) / size
    shifts = shift_range(size)
    ps = closed_form_ps(a, b, size, shifts)
    tail = float(ps[np.abs(shifts) > r].sum())
    big_c = -b * size
    return ComplexLeakageReport(a, b, big_c, r, q_star, shifts, ps, tail,
                                tail_bound(b, size, r), tail_bound_c(big_c, r), size)


def error_floor(lambda_im: float, big_c: float, y: int) -> float:
    """Real-part error ``2^y lambda_im / C`` left after trading accuracy for success."""
    return 2**y * lambda_im / big_c
