"""Experiment configuration, dispatch, and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources

import numpy as np

from . import __version__
from .algorithms import (algorithm1_real, algorithm2_complex, algorithm3_normal,
                         ground_truth_deltas)
from .core import EigenSystem, as_dense, gershgorin_bound, make_eigensystem
from .encoder import EncodingParams, build_cmk
from .leakage import leakage_analysis
from .mmio import ingest_matrix
from .sampling import plan_and_sample
from .solver import check_truncation_bounds, euler_convergence, solve_block_system

PIPELINES = ("real", "complex", "normal", "leakage", "euler-check", "bounds", "sample")
MATRIX_PIPELINES = ("real", "complex", "normal", "euler-check", "bounds")
VERIFY_DENSE_MAX = 64


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FactorySpec:
    spectrum: tuple[complex, ...]
    target_cond: float = 1.0
    seed: int = 0

    @property
    def n(self) -> int:
        return len(self.spectrum)

    def build(self) -> EigenSystem:
        return make_eigensystem(self.n, list(self.spectrum), self.target_cond, self.seed)

    def to_dict(self) -> dict:
        return {"n": self.n, "spectrum": [_cplx(z) for z in self.spectrum],
                "target_cond": self.target_cond, "seed": self.seed}


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    matrix_path: str | None = None
    factory: FactorySpec | None = None
    eps: float = 1 / 64
    eps1: float = 1 / 64
    eps2: float = 1 / 64
    rho: float | None = None
    delta: float = 0.01
    seed: int = 0
    m: int | None = None
    k: int | None = None
    dt: float | None = None
    emit: str = "json"
    output: str | None = None
    verify_dense: bool = False
    include_distribution: bool = False
    probs: tuple[float, ...] | None = None
    trials: int = 2000
    lambda_re: float | None = None
    lambda_im: float | None = None
    r: int | None = None

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}")
        if self.pipeline in MATRIX_PIPELINES:
            if (self.matrix_path is None) == (self.factory is None):
                raise ConfigError("exactly one matrix source (file or factory) is required")
        for name in ("eps", "eps1", "eps2", "delta"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {val}")
        if self.emit not in ("json", "csv"):
            raise ConfigError("emit must be 'json' or 'csv'")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("output")
        d["factory"] = self.factory.to_dict() if self.factory else None
        d["probs"] = list(self.probs) if self.probs is not None else None
        return d


def _cplx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _f(x) -> float | None:
    """JSON-safe float (non-finite values become ``None``)."""
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class RunReport:
    config: dict
    results: dict
    version: str = __version__
    seed: int = 0
    wall_time_s: float = 0.0
    status: str = "ok"
    error: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def table(self) -> tuple[list[str], list[list]]:
        """The report's main table (estimates, bound rows, ...) for CSV output."""
        res = self.results
        for key in ("estimates", "bound_rows", "leakage_rows", "euler_rows", "plan_rows"):
            if key in res and res[key]:
                rows = res[key]
                header = sorted(rows[0])
                return header, [[r[h] for h in header] for r in rows]
        return ["status"], [[self.status]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        header, rows = self.table()
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else _csv_cell(v) for v in row])
        return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, list):
        return json.dumps(v)
    return v


def schema() -> dict:
    text = resources.files("eigsim").joinpath("schema/run_report.schema.json").read_text()
    return json.loads(text)


def _load_source(cfg: ExperimentConfig):
    if cfg.factory is not None:
        es = cfg.factory.build()
        return es.matrix, es
    mat = ingest_matrix(cfg.matrix_path)
    if mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"matrix must be square, got {mat.shape}")
    return mat, None


def _dense_truth(mat, cfg: ExperimentConfig) -> np.ndarray | None:
    if not cfg.verify_dense:
        return None
    if mat.shape[0] > VERIFY_DENSE_MAX:
        raise ConfigError(f"--verify-dense is limited to n <= {VERIFY_DENSE_MAX}")
    return np.linalg.eigvals(as_dense(mat))


def _truth(es, mat, cfg):
    if es is not None:
        return es.eigvals, "factory"
    dense = _dense_truth(mat, cfg)
    return (dense, "dense-eig") if dense is not None else (None, None)


def _nearest(value: complex, truth) -> float | None:
    if truth is None:
        return None
    return _f(np.min(np.abs(np.asarray(truth) - value)))


def _distribution(dist) -> dict:
    return {"register_size": dist.register_size, "mass": [_f(x) for x in dist.mass]}


def _run_real(cfg: ExperimentConfig) -> dict:
    mat, es = _load_source(cfg)
    truth, origin = _truth(es, mat, cfg)
    source = es if es is not None else mat
    state = None if es is not None else np.ones(mat.shape[0])
    res = algorithm1_real(source, state, eps=cfg.eps, rho=cfg.rho, m=cfg.m, k=cfg.k, dt=cfg.dt)
    out = {
        "params": res.params.to_dict(),
        "step_condition_ok": res.step_condition_ok,
        "estimates": [{"value": _f(e.value), "register_index": e.register_index,
                       "sign": e.sign, "mass": _f(e.mass),
                       "delta": _nearest(e.value, truth)} for e in res.estimates],
        "post_selection": {"post_select_prob": _f(res.post_select_prob),
                           "ancilla_zero_mass": _f(res.ancilla_zero_mass),
                           "amplification_rounds": res.amplification_rounds_model,
                           "mass_lower_bound": None if res.mass_lower_bound is None
                           else _f(res.mass_lower_bound)},
        "truth_source": origin,
    }
    if truth is not None:
        out["truth_deltas"] = [_f(d) for d in ground_truth_deltas(res.values, truth.real)]
    if cfg.include_distribution:
        out["distribution"] = _distribution(res.distribution)
    return out


def _run_complex(cfg: ExperimentConfig) -> dict:
    mat, es = _load_source(cfg)
    truth, origin = _truth(es, mat, cfg)
    res = algorithm2_complex(es if es is not None else mat, eps=cfg.eps, rho=cfg.rho,
                             m=cfg.m, k=cfg.k, dt=cfg.dt)
    out = {
        "params": res.params.to_dict(),
        "estimates": [{"re": _f(e.re), "im": _f(e.im), "mass": _f(e.mass),
                       "re_index": e.re_index, "im_index": e.im_index,
                       "delta": _nearest(e.value, truth)} for e in res.estimates],
        "post_selection": {"stage_probs": [_f(p) for p in res.stage_probs],
                           "amplification_rounds": res.amplification_rounds_model,
                           "mass_lower_bound": _f(res.mass_lower_bound)},
        "cross_growth_log10": _f(res.cross_growth_log10),
        "truth_source": origin,
    }
    if cfg.include_distribution:
        out["distribution"] = _distribution(res.stage1)
    return out


def _run_normal(cfg: ExperimentConfig) -> dict:
    mat, es = _load_source(cfg)
    truth, origin = _truth(es, mat, cfg)
    state = es.mixture().amplitudes if es is not None else None
    res = algorithm3_normal(mat, state, eps1=cfg.eps1, eps2=cfg.eps2)
    rows = []
    for e in res.estimates:
        row = {"sigma": _f(e.sigma), "theta": _f(e.theta), "mass": _f(e.mass),
               "delta_sigma": None, "delta_theta": None}
        if truth is not None:
            sig = np.abs(truth)
            th = (np.angle(truth) / (2 * np.pi)) % 1.0
            circ = np.abs((th - e.theta + 0.5) % 1.0 - 0.5)
            j = int(np.argmin(np.abs(sig - e.sigma) + circ))
            row["delta_sigma"] = _f(abs(sig[j] - e.sigma))
            row["delta_theta"] = _f(circ[j])
        rows.append(row)
    return {"estimates": rows, "unitarity_error": _f(res.unitarity_error),
            "phase_error": _f(res.phase_error), "q_bits": res.q_bits,
            "sve_register_size": res.sve_register_size,
            "label_collisions": res.label_collisions, "truth_source": origin}


def _run_bounds(cfg: ExperimentConfig) -> dict:
    if cfg.factory is None:
        raise ConfigError("the bounds pipeline needs a factory matrix (known eigenvectors)")
    es = cfg.factory.build()
    rho = cfg.rho if cfg.rho is not None else gershgorin_bound(es.matrix)
    params = EncodingParams.for_real(rho, cfg.eps, m=cfg.m, k=cfg.k, dt=cfg.dt)
    gen = 2j * np.pi * params.dt * es.matrix
    rows, per_vector = [], []
    for j in range(es.n):
        sol = solve_block_system(build_cmk(gen, params, es.eigvecs[:, j]))
        report = check_truncation_bounds(es, sol, params)
        per_vector.append({"eigenvalue": _f(report.eigenvalue), "ok": report.ok})
        for r in report.rows:
            rows.append({"eigenvector": j, "check": r.check, "p": r.p,
                         "measured": _f(r.measured), "bound": _f(r.bound), "status": r.status})
    counts: dict[str, int] = {}
    for r in rows:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    return {"params": params.to_dict(), "bound_rows": rows, "status_counts": counts,
            "eigenvectors": per_vector}


def _run_euler(cfg: ExperimentConfig) -> dict:
    mat, es = _load_source(cfg)
    x0 = es.mixture().amplitudes if es is not None else np.ones(mat.shape[0]) / math.sqrt(mat.shape[0])
    m0 = cfg.m or 16
    t_final = m0 * cfg.dt if cfg.dt is not None else 0.5
    chk = euler_convergence(mat, x0, t_final, m0=m0)
    rows = [{"steps": s, "error": _f(e)} for s, e in zip(chk.steps, chk.errors)]
    return {"t_final": t_final, "euler_rows": rows, "slopes": [_f(s) for s in chk.slopes]}


def _run_leakage(cfg: ExperimentConfig) -> dict:
    if cfg.lambda_re is None or cfg.lambda_im is None or cfg.r is None:
        raise ConfigError("leakage needs lambda_re, lambda_im and r")
    dt = cfg.dt if cfg.dt is not None else 0.5
    m = cfg.m if cfg.m is not None else 63
    rep = leakage_analysis(cfg.lambda_re, cfg.lambda_im, dt, m, cfg.r)
    rows = [{"shift": int(s), "p_s": _f(p)} for s, p in zip(rep.shifts, rep.p_s)]
    return {"a": _f(rep.a), "b": _f(rep.b), "big_c": _f(rep.big_c), "r": rep.r,
            "q_star": rep.q_star, "tail_measured": _f(rep.tail_measured),
            "tail_bound": _f(rep.tail_bound), "tail_bound_c": _f(rep.tail_bound_c),
            "leakage_rows": rows}


def _run_sample(cfg: ExperimentConfig) -> dict:
    if cfg.probs is None:
        raise ConfigError("sample needs a probability vector")
    plan, coverage = plan_and_sample(cfg.probs, cfg.delta, cfg.seed, cfg.trials)
    d = plan.to_dict()
    return {"plan": {k: (_f(v) if isinstance(v, float) else v) for k, v in d.items()},
            "sample_count": plan.sample_count, "trials": cfg.trials,
            "empirical_coverage": _f(coverage),
            "plan_rows": [{"outcome": i, "probability": _f(p)} for i, p in enumerate(plan.probs)]}


_DISPATCH = {"real": _run_real, "complex": _run_complex, "normal": _run_normal,
             "bounds": _run_bounds, "euler-check": _run_euler, "leakage": _run_leakage,
             "sample": _run_sample}


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run one configured pipeline. Errors propagate to the caller."""
    config.validate()
    start = time.perf_counter()
    results = _DISPATCH[config.pipeline](config)
    return RunReport(config.echo(), results, seed=config.seed,
                     wall_time_s=time.perf_counter() - start)


def error_report(config: ExperimentConfig, exc: BaseException) -> RunReport:
    return RunReport(config.echo(), {}, seed=config.seed, status="error",
                     error={"type": type(exc).__name__, "message": str(exc)})


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy of ``config`` with the run seed (and factory seed) replaced."""
    factory = replace(config.factory, seed=seed) if config.factory else None
    return replace(config, seed=seed, factory=factory)


def run_sweep(config: ExperimentConfig, seeds: list[int], workers: int = 1) -> list[RunReport]:
    """Run ``config`` once per seed; results come back in seed-list order."""
    configs = [with_seed(config, s) for s in seeds]
    if workers <= 1:
        return [run_experiment(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_experiment, configs))
