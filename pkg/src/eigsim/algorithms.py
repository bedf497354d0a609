"""End-to-end eigenvalue-estimation pipelines.

* :func:`algorithm1_real` - real spectra via the truncated-Taylor encoding of
  ``dx/dt = 2 pi i M x`` followed by inverse-Fourier decoding.
* :func:`algorithm2_complex` - complex spectra via two Kronecker-lifted
  encodings (real parts, then imaginary parts on the conditioned states).
* :func:`algorithm3_normal` - normal matrices via singular-value labels and
  phase estimation of the polar unitary.

Amplitude amplification is not simulated; results carry the post-selection
probability and the modeled round count ``ceil(1/sqrt(prob))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import schur

from .core import EigenSystem, InputState, as_dense, commutator_norm, condition_number, \
    gershgorin_bound, is_normal
from .encoder import EncodingParams, build_cmk
from .phase import (PhaseDistribution, SpectralEstimate, decode_estimate, find_peaks,
                    inverse_fourier_decode, qpe_register_bits, qpe_simulate, sve_basis,
                    sve_simulate)
from .solver import PreconditionError, forward_substitute, solve_block_system

IMAG_TOL = 1e-9


class SpectrumError(PreconditionError):
    """The spectrum violates the pipeline's assumptions."""


class NonNormalError(PreconditionError):
    def __init__(self, comm: float):
        super().__init__(f"matrix is not normal: ||M M^H - M^H M|| = {comm:.3e}")
        self.commutator_norm = comm


def amplification_rounds(prob: float) -> int:
    return math.ceil(1 / math.sqrt(prob))


def _split_source(source) -> tuple[np.ndarray | sp.spmatrix, EigenSystem | None]:
    if isinstance(source, EigenSystem):
        return source.matrix, source
    return source, None


def _state_vector(state, es: EigenSystem | None, n: int) -> np.ndarray:
    if state is None:
        if es is None:
            raise ValueError("an input state is required when no eigensystem is given")
        return es.mixture().amplitudes
    if isinstance(state, InputState):
        return state.amplitudes
    v = InputState.prepare(state).amplitudes
    if v.size != n:
        raise ValueError(f"input state has length {v.size}, expected {n}")
    return v


def ground_truth_deltas(estimates, truth, tol: float = 1e-9) -> list[float]:
    """Distance from each distinct true value to its nearest estimate."""
    vals = np.asarray(estimates, dtype=complex).ravel()
    out: list[float] = []
    seen: list[complex] = []
    for t in np.asarray(truth, dtype=complex).ravel():
        if any(abs(t - s) <= tol for s in seen):
            continue
        seen.append(t)
        out.append(float(np.min(np.abs(vals - t))) if vals.size else float("inf"))
    return out


# ---------------------------------------------------------------------------
# real spectra


@dataclass
class RealSpectrumResult:
    estimates: list[SpectralEstimate]
    post_select_prob: float
    ancilla_zero_mass: float
    params: EncodingParams
    amplification_rounds_model: int
    distribution: PhaseDistribution
    mass_lower_bound: float | None = None
    step_condition_ok: bool = True

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])


def algorithm1_real(source, input_state=None, eps: float = 1 / 64, rho: float | None = None,
                    *, m: int | None = None, k: int | None = None, dt: float | None = None,
                    n_expected: int | None = None) -> RealSpectrumResult:
    """Estimate the real eigenvalues present in ``input_state``.

    ``source`` is an :class:`EigenSystem` (spectrum checked against ground
    truth, default input the uniform eigenvector mixture) or a bare matrix
    whose spectrum is trusted to be real. ``rho`` defaults to the Gershgorin
    bound; ``dt = 1/(2 rho)`` puts every phase ``lambda dt`` in
    ``[-1/2, 1/2]``, with ``+-rho`` itself on the sign-wrap boundary.
    """
    mat, es = _split_source(source)
    n = mat.shape[0]
    if es is not None:
        if np.max(np.abs(es.eigvals.imag)) > IMAG_TOL:
            raise SpectrumError(
                f"spectrum is not real: max |Im lambda| = {np.max(np.abs(es.eigvals.imag)):.3e}")
        top = float(np.max(np.abs(es.eigvals)))
        if rho is not None and rho < top:
            raise SpectrumError(f"rho = {rho} is below max |lambda| = {top}")
    if rho is None:
        rho = gershgorin_bound(mat)
    params = EncodingParams.for_real(rho, eps, m=m, k=k, dt=dt)
    x0 = _state_vector(input_state, es, n)

    gen = 2j * np.pi * params.dt * sp.csr_matrix(mat, dtype=complex)
    sol = solve_block_system(build_cmk(gen, params, x0))
    prob = sol.ancilla_zero_mass
    dist = inverse_fourier_decode(sol.trajectory, prob)
    estimates = decode_estimate(dist, params.dt, rho=rho, eps=eps,
                                n_expected=n_expected or n)
    bound = None
    if es is not None:
        bound = (3 * es.cond_e * math.sqrt(params.k) * params.m) ** -2
    return RealSpectrumResult(estimates, prob, prob, params, amplification_rounds(prob), dist,
                              bound, params.step_condition_ok)


# ---------------------------------------------------------------------------
# complex spectra


@dataclass(frozen=True)
class ComplexEstimate:
    re: float
    im: float | None
    mass: float
    re_index: int
    im_index: int | None

    @property
    def value(self) -> complex:
        return complex(self.re, self.im or 0.0)


@dataclass
class ComplexSpectrumResult:
    estimates: list[ComplexEstimate]
    params: EncodingParams
    stage_probs: list[float]
    mass_lower_bound: float
    amplification_rounds_model: list[int]
    stage1: PhaseDistribution
    cross_growth_log10: float = 0.0
    joint: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])


def eigensystem_from_matrix(mat, cond_limit: float = 1e12) -> EigenSystem:
    """Dense eigendecomposition as ground truth for a bare matrix."""
    d = as_dense(mat)
    lam, e = np.linalg.eig(d)
    e = e / np.linalg.norm(e, axis=0)[None, :]
    kappa = condition_number(e)
    if not np.isfinite(kappa) or kappa > cond_limit:
        raise SpectrumError(f"matrix is not (numerically) diagonalizable: kappa(E) = {kappa:.3e}")
    return EigenSystem(d, e, lam, kappa, is_normal(d))


def paired_state(es: EigenSystem, beta=None) -> np.ndarray:
    """Normalized ``sum_j beta_j E_j (x) conj(E_j)``."""
    n = es.n
    if beta is None:
        beta = np.full(n, 1 / math.sqrt(n))
    beta = np.asarray(beta, dtype=complex)
    v = sum(beta[j] * np.kron(es.eigvecs[:, j], es.eigvecs[:, j].conj()) for j in range(n))
    return InputState.prepare(v).amplitudes


def algorithm2_complex(source, eps: float = 1 / 32, rho: float | None = None, *,
                       beta=None, imaginary: bool = True, m: int | None = None,
                       k: int | None = None, dt: float | None = None,
                       n_expected: int | None = None, keep_joint: bool = False
                       ) -> ComplexSpectrumResult:
    """Estimate complex eigenvalues ``Re + i Im`` in two encoding stages.

    Stage 1 encodes ``pi i dt (M (x) I + I (x) conj(M))`` whose action on
    ``E_j (x) conj(E_j)`` is ``2 pi i dt Re(lambda_j)``; stage 2 encodes
    ``pi dt (M (x) I - I (x) conj(M))`` (``2 pi i dt Im(lambda_j)``) and is run
    from every stage-1 frequency branch. Imaginary parts are read from the
    stage-2 register conditioned on each stage-1 peak window.

    ``rho`` defaults to three times the Gershgorin bound so that, with
    ``dt = 1/rho``, every phase stays within ``[-1/3, 1/3]``, clear of the
    sign-wrap point where Taylor truncation error could flip the sign.

    The lifted generators also act on the off-diagonal modes
    ``E_i (x) conj(E_j)``, which are absent from the input but seeded by
    rounding error; across both stages they grow by up to
    ``exp(pi m dt (spread(Re) + spread(Im)))``. ``cross_growth_log10``
    reports that factor; once it approaches 16 the floating-point result is
    dominated by those modes.
    """
    mat, es = _split_source(source)
    if es is None:
        es = eigensystem_from_matrix(mat)
    d = as_dense(mat)
    n = d.shape[0]
    if rho is None:
        rho = 3 * gershgorin_bound(d)
    top = max(np.max(np.abs(es.eigvals.real)), np.max(np.abs(es.eigvals.imag)))
    if top >= rho / 2:
        raise SpectrumError(f"rho = {rho} must exceed twice the largest |Re| or |Im| ({top})")
    params = EncodingParams.for_complex(rho, eps, m=m, k=k, dt=dt)
    nn = n * n
    mm = sp.csr_matrix(d)
    eye = sp.identity(n, dtype=complex, format="csr")
    lifted_sum = sp.kron(mm, eye) + sp.kron(eye, mm.conj())
    lifted_diff = sp.kron(mm, eye) - sp.kron(eye, mm.conj())

    x0 = paired_state(es, beta)
    sol1 = solve_block_system(build_cmk(1j * np.pi * params.dt * lifted_sum, params, x0))
    prob1 = sol1.ancilla_zero_mass
    dist1 = inverse_fourier_decode(sol1.trajectory, prob1)
    n_exp = n_expected or n
    re_est = decode_estimate(dist1, params.dt, eps=eps, n_expected=n_exp)
    bound = (9 * es.cond_e**4 * params.k * params.m**2) ** -2
    lam = es.eigvals
    spread = np.ptp(lam.real) + np.ptp(lam.imag)
    growth = math.pi * params.m * params.dt * spread / math.log(10)

    if not imaginary:
        ests = [ComplexEstimate(e.value, None, e.mass, e.register_index, None) for e in re_est]
        return ComplexSpectrumResult(ests, params, [prob1], bound,
                                     [amplification_rounds(prob1)], dist1, growth)

    # stage 2: every stage-1 branch with non-negligible weight becomes an initial state
    q1 = dist1.register_size
    live = np.flatnonzero(dist1.mass > 1e-14)
    rhs = np.zeros((params.n_blocks * nn, live.size), dtype=complex)
    rhs[:nn] = dist1.conditioned[live].T
    sys2 = build_cmk(np.pi * params.dt * lifted_diff, params)
    x2 = forward_substitute(sys2.matrix, rhs, nn).reshape(params.n_blocks, nn, live.size)
    traj2 = x2[:: params.k + 1]
    prob2 = float(np.sum(np.abs(traj2) ** 2) / np.sum(np.abs(x2) ** 2))
    freq2 = np.fft.fft(traj2, axis=0, norm="ortho")
    q2 = freq2.shape[0]
    joint = np.zeros((q1, q2))
    joint[live] = np.sum(np.abs(freq2) ** 2, axis=1).T
    total = joint.sum()
    joint /= total

    half = max(1, int(math.floor(eps * q1 * params.dt)))
    ests = []
    for e in re_est:
        rows = (e.register_index + np.arange(-half, half + 1)) % q1
        marginal = joint[rows].sum(axis=0)
        cond = PhaseDistribution(q2, marginal / marginal.sum(), prob2, None, float(marginal.sum()))
        for im in decode_estimate(cond, params.dt, eps=eps, n_expected=n_exp):
            ests.append(ComplexEstimate(e.value, im.value, e.mass * im.mass,
                                        e.register_index, im.register_index))
    return ComplexSpectrumResult(ests, params, [prob1, prob2], bound,
                                 [amplification_rounds(prob1), amplification_rounds(prob2)],
                                 dist1, growth, joint if keep_joint else None)


# ---------------------------------------------------------------------------
# normal matrices


@dataclass(frozen=True)
class NormalEstimate:
    sigma: float
    theta: float
    mass: float


@dataclass
class NormalSpectrumResult:
    estimates: list[NormalEstimate]
    unitarity_error: float
    phase_error: float
    q_bits: int
    sve_register_size: int
    label_collisions: bool
    w: np.ndarray = field(repr=False)

    @property
    def pairs(self) -> np.ndarray:
        return np.array([(e.sigma, e.theta) for e in self.estimates])


def polar_phase_operator(mat, eps1: float, scale: float | None = None) -> tuple[np.ndarray, object]:
    """The operator ``W`` on ``{0,1} (x) C^n`` built from singular-value labels.

    ``W = X_anc . SVE^-1 . Neg . SVE`` where ``Neg`` flips the sign of every
    component whose signed label is strictly negative. On ``|0>|u_j>`` for a
    normal ``M = sum sigma_j e^{2 pi i theta_j} |u_j><u_j|`` it acts as
    ``e^{-2 pi i theta_j}``. Components with ``sigma~ = 0`` receive no sign
    and are swapped to the other ancilla sector.
    """
    n = as_dense(mat).shape[0]
    labeled = sve_simulate(mat, np.zeros(2 * n), eps1, scale)
    signs = np.where(labeled.values < 0, -1.0, 1.0)
    basis = labeled.basis
    reflect = (basis * signs[None, :]) @ basis.conj().T
    flip = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return flip @ reflect, labeled


def algorithm3_normal(mat, input_state=None, eps1: float = 1 / 64, eps2: float = 1 / 64, *,
                      delta: float = 0.1, scale: float | None = None,
                      normal_rtol: float = 1e-10, n_expected: int | None = None
                      ) -> NormalSpectrumResult:
    """Estimate ``(sigma_j, theta_j)`` with ``lambda_j = sigma_j e^{2 pi i theta_j}``.

    ``input_state`` (length ``n``) defaults to the uniform mixture of an
    orthonormal eigenbasis. The phase register has
    ``qpe_register_bits(eps2, delta)`` qubits.
    """
    d = as_dense(mat)
    n = d.shape[0]
    comm = commutator_norm(d)
    if comm > normal_rtol * max(np.linalg.norm(d, 2) ** 2, 1e-300):
        raise NonNormalError(comm)

    tri, z = schur(d, output="complex")
    lam = np.diag(tri)
    if input_state is None:
        b = z @ np.full(n, 1 / math.sqrt(n))
    else:
        b = _state_vector(input_state, None, n)

    w, labeled = polar_phase_operator(d, eps1, scale)
    unit_err = float(np.linalg.norm(w.conj().T @ w - np.eye(2 * n), 2))
    if unit_err > 1e-10:
        raise RuntimeError(f"W is not unitary: {unit_err:.3e}")
    phase_err = 0.0
    for j in range(n):
        if abs(lam[j]) < 1e-12:
            continue
        e0 = np.concatenate([z[:, j], np.zeros(n)])
        expect = np.exp(-1j * np.angle(lam[j]))
        phase_err = max(phase_err, abs(np.vdot(e0, w @ e0) - expect))
    if phase_err > 1e-8:
        raise RuntimeError(f"W does not act as the eigenphase on |0>|u_j>: error {phase_err:.3e}")

    q_bits = qpe_register_bits(eps2, delta)
    dist = qpe_simulate(w, np.concatenate([b, np.zeros(n)]), q_bits)
    big_q = dist.register_size
    half = max(1, int(math.floor(eps2 * big_q / 2)))
    thr = 1 / (2 * (n_expected or n))
    basis, _ = sve_basis(d)
    abs_labels = np.array([min(int(l), labeled.register_size - int(l)) for l in labeled.labels])

    ests = []
    for pk in find_peaks(dist.mass, half, thr):
        bins = (pk.index + np.arange(-half, half + 1)) % big_q
        coeffs = basis.conj().T @ dist.conditioned[bins].T  # (2n, bins)
        weights = np.sum(np.abs(coeffs) ** 2, axis=1) / dist.total
        theta = (-pk.position / big_q) % 1.0
        if theta >= 1.0:  # -tiny % 1.0 rounds up to 1.0
            theta = 0.0
        for lab in np.unique(abs_labels):
            wm = float(weights[abs_labels == lab].sum())
            if wm >= thr:
                sigma = lab * labeled.scale / labeled.register_size
                ests.append(NormalEstimate(float(sigma), float(theta), wm))
    return NormalSpectrumResult(ests, unit_err, float(phase_err), q_bits,
                                labeled.register_size, labeled.collisions, w)
