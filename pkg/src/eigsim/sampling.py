"""How many measurements reveal every outcome of a distribution."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

EXACT_MAX_OUTCOMES = 20


@dataclass
class SamplePlan:
    """``sample_count = ceil(ln(n/delta) / p_max)`` draws.

    ``claimed_coverage`` is ``1 - n e^{-m p_max}``; ``union_coverage`` is the
    valid lower bound ``1 - sum_j (1 - p_j)^m``; ``exact_coverage`` the exact
    probability of seeing every nonzero outcome (``None`` for very large n).
    """

    probs: list[float]
    p_max: float
    delta: float
    sample_count: int
    claimed_coverage: float
    union_coverage: float
    exact_coverage: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _validate(probs, delta: float) -> np.ndarray:
    p = np.asarray(probs, dtype=float).ravel()
    if p.size == 0 or np.any(p < 0):
        raise ValueError("probabilities must be a non-empty non-negative vector")
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return p


def exact_coverage(probs, draws: int) -> float:
    """Probability that ``draws`` i.i.d. samples hit every nonzero outcome."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    if p.size > EXACT_MAX_OUTCOMES:
        raise ValueError(f"inclusion-exclusion limited to {EXACT_MAX_OUTCOMES} outcomes")
    total = 0.0
    for size in range(p.size + 1):
        for subset in itertools.combinations(range(p.size), size):
            miss = 1.0 - float(p[list(subset)].sum())
            total += (-1) ** size * max(miss, 0.0) ** draws
    return total


def make_plan(probs, delta: float) -> SamplePlan:
    p = _validate(probs, delta)
    n = p.size
    p_max = float(p.max())
    count = math.ceil(math.log(n / delta) / p_max)
    nz = p[p > 0]
    exact = exact_coverage(nz, count) if nz.size <= EXACT_MAX_OUTCOMES else None
    return SamplePlan(p.tolist(), p_max, delta, count,
                      1 - n * math.exp(-count * p_max),
                      1 - float(np.sum((1 - nz) ** count)), exact)


def plan_and_sample(probs, delta: float, seed: int, trials: int) -> tuple[SamplePlan, float]:
    """Plan the draw count and estimate full coverage over seeded trials.

    Trial ``t`` draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on how trials are scheduled.
    """
    plan = make_plan(probs, delta)
    p = np.asarray(plan.probs)
    need = np.flatnonzero(p > 0)
    hits = 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        draws = np.random.default_rng(child).choice(p.size, size=plan.sample_count, p=p)
        hits += np.all(np.isin(need, draws))
    return plan, hits / trials
