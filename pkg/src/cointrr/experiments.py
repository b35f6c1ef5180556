"""Monte Carlo experiment runners and the command-line interface.

Four experiments, each reading a JSON config and writing ``results.csv`` (first
line ``# schema=v1``) plus ``meta.json`` into an output directory:

- ``mspe``: one-step prediction error T·E‖ΔX_{T+1} − Γ̂X_T‖² of fixed-rank,
  least-squares, post-selection, and soft-weighted estimators over a grid of
  near-unit-root strengths c, with per-index weight summaries.
- ``dist_compare``: scaled deviations [√T·(Γ̂ − Γ)^{·1}, T·(Γ̂ − Γ)^{·2}] of
  fixed-rank estimators from long simulated samples next to draws from the
  matching limit laws (under-rank deviations are bias-recentred).
- ``rank_bias``: bootstrap sequential-test rank-selection histograms across a
  grid of smallest population eigenvalues, with the fixed-rank bias norms
  ‖b̃_k‖_F of the same models.
- ``fit``: pooled estimation on user CSV trials with a chosen weight rule,
  reporting coefficients, eigenvalues, test statistics, and held-out one-step
  prediction error.

Reproducibility contract: identical config (including seed) produces a
byte-identical ``results.csv``; replication streams are derived per replication
index, so splitting work across threads cannot change any output.
``meta.json`` carries versions and wall time and is exempt from byte identity.

Exit codes: 0 success, 2 config/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import NUMBA_ENABLED, bootstrap_statistics, fit_eigenproblem, sim_levels
from .errors import (
    BootstrapFailed,
    CointrrError,
    DegenerateSpectrum,
    DimensionMismatch,
    EigenvalueOutOfRange,
    InvalidConfig,
    InvalidRank,
    InvalidWeights,
    NotPositiveDefinite,
    ParseError,
    RankDeficient,
    SingularQ,
    TooShort,
    Unstable,
)
from .estimate import (
    coint_eig,
    concentrate_lags,
    cross_covariances,
    ls_estimate,
    psi_estimate,
    rrr_estimate,
    weighted_estimate,
)
from .matops import GenEig
from .model import VecmParams, asymptotic_bias, q_transform
from .rank import (
    critical_values_from_statistics,
    bootstrap_critical_values,
    lr_statistics,
    select_rank,
    weights_exp,
    weights_hard,
    weights_sigmoid,
)
from .simulate import RngStream, Trajectory, sample_limit_law, simulate_vecm

__all__ = [
    "ExperimentConfig",
    "gamma_c_params",
    "rank_two_benchmark_params",
    "spread_eigs_params",
    "run_mspe",
    "run_dist_compare",
    "run_rank_bias",
    "run_fit",
    "main",
]

SCHEMA_LINE = "# schema=v1"

_STATISTICS = ("trace", "max_eig")
_DRIFTS = ("none", "constant")


# ------------------------------------------------------------------ generators


def gamma_c_params(p: int, c: float, t_steps: int) -> VecmParams:
    """Diagonal family Γ_c: a third of the eigenvalues at −1.5, a third at
    −c/T, a third at 0; unit innovation covariance.

    The true cointegration rank is 2p/3 for c > 0 and p/3 for c = 0, so the
    middle block sweeps the near-unit-root regime as c grows. Requires p
    divisible by 3 and 0 ≤ c < 2T (the stationary root is 1 − c/T).
    """
    if p < 3 or p % 3 != 0:
        raise InvalidConfig(f"the diagonal family needs p divisible by 3, got p={p}")
    if t_steps < 1:
        raise InvalidConfig(f"t_steps must be positive, got {t_steps}")
    if not 0.0 <= c < 2.0 * t_steps:
        raise InvalidConfig(f"need 0 <= c < 2*t_steps for a stable block, got c={c}")
    third = p // 3
    diag = np.zeros(p)
    diag[:third] = -1.5
    diag[third : 2 * third] = -c / t_steps
    active = np.nonzero(diag)[0]
    alpha = np.zeros((p, active.size))
    beta = np.zeros((p, active.size))
    for col, i in enumerate(active):
        alpha[i, col] = diag[i]
        beta[i, col] = 1.0
    return VecmParams(alpha=alpha, beta=beta, sigma_z=np.eye(p))


def rank_two_benchmark_params(sigma_seed: int = 0) -> VecmParams:
    """Four-channel rank-2 benchmark with a seeded random PD noise covariance
    Σ_Z = I₄ + UUᵀ/2, U uniform on [0, 1]."""
    alpha = np.array([[-0.7, 0.0], [0.0, -0.7], [0.0, 0.0], [0.0, 0.0]])
    beta = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    u = np.random.default_rng(sigma_seed).uniform(0.0, 1.0, size=(4, 4))
    return VecmParams(alpha=alpha, beta=beta, sigma_z=np.eye(4) + 0.5 * u @ u.T)


def spread_eigs_params(lam_min: float, p: int = 8, r: int = 4) -> VecmParams:
    """Coordinate-aligned rank-r system whose squared population eigenvalues
    form the arithmetic grid lam_min .. 0.81 − lam_min.

    α = (−2D; 0) and β = (I_r; 0) with D = diag(√λ_k), so ‖Π‖_F² = 4Σλ_k =
    2r(λ_min + λ_max) independently of lam_min. Requires 0 < lam_min < 0.405
    and 2 ≤ r < p.
    """
    if not 0.0 < lam_min < 0.405:
        raise InvalidConfig(f"lam_min must lie in (0, 0.405), got {lam_min}")
    if not 2 <= r < p:
        raise InvalidConfig(f"the spread family needs 2 <= r < p, got r={r}, p={p}")
    lam_max = 0.81 - lam_min
    lams = lam_min + (lam_max - lam_min) * np.arange(r) / (r - 1)
    d = np.diag(np.sqrt(lams))
    alpha = np.vstack([-2.0 * d, np.zeros((p - r, r))])
    beta = np.vstack([np.eye(r), np.zeros((p - r, r))])
    return VecmParams(alpha=alpha, beta=beta, sigma_z=np.eye(p))


_GENERATORS = {
    "gamma_c": gamma_c_params,
    "rank_two_benchmark": rank_two_benchmark_params,
    "appc2": rank_two_benchmark_params,
    "spread_eigs": spread_eigs_params,
    "appc3": spread_eigs_params,
}


# ------------------------------------------------------------------- estimators


@dataclass(frozen=True)
class EstimatorSpec:
    """One entry of the config's estimator list, with a stable CSV label."""

    kind: str
    label: str
    k: int = 0
    alpha: float = 0.0
    a: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    b: int = 0

    @property
    def needs_bootstrap(self) -> bool:
        return self.kind in ("hard", "sigmoid")


def _check_keys(doc: dict, required: tuple, optional: tuple, where: str) -> None:
    if not isinstance(doc, dict):
        raise InvalidConfig(f"{where} must be a JSON object, got {type(doc).__name__}")
    missing = [key for key in required if key not in doc]
    if missing:
        raise InvalidConfig(f"{where}: missing required keys {missing}")
    unknown = sorted(set(doc) - set(required) - set(optional))
    if unknown:
        raise InvalidConfig(f"{where}: unknown keys {unknown}")


def _as_int(doc: dict, key: str, where: str, minimum: int, default=None) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidConfig(f"{where}: {key} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidConfig(f"{where}: {key} must be >= {minimum}, got {value}")
    return value


def _as_float(doc: dict, key: str, where: str, default=None) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(f"{where}: {key} must be a number, got {value!r}")
    return float(value)


def _parse_estimator(doc: dict, default_b: int) -> EstimatorSpec:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InvalidConfig(f"estimator entries need a 'kind', got {doc!r}")
    kind = doc["kind"]
    where = f"estimator {kind!r}"
    if kind == "rrr":
        _check_keys(doc, ("kind", "k"), (), where)
        k = _as_int(doc, "k", where, minimum=0)
        return EstimatorSpec(kind="rrr", label=f"rrr{k}", k=k)
    if kind == "ls":
        _check_keys(doc, ("kind",), (), where)
        return EstimatorSpec(kind="ls", label="ls")
    if kind == "hard":
        _check_keys(doc, ("kind", "alpha"), ("b",), where)
        alpha = _as_float(doc, "alpha", where)
        if not 0.0 < alpha < 1.0:
            raise InvalidConfig(f"{where}: alpha must be in (0, 1), got {alpha}")
        b = _as_int(doc, "b", where, minimum=1, default=default_b)
        return EstimatorSpec(kind="hard", label=f"hard({alpha:g})", alpha=alpha, b=b)
    if kind == "sigmoid":
        _check_keys(doc, ("kind", "a", "alpha"), ("b",), where)
        a = _as_float(doc, "a", where)
        alpha = _as_float(doc, "alpha", where)
        if a <= 0.0:
            raise InvalidConfig(f"{where}: a must be positive, got {a}")
        if not 0.0 < alpha < 1.0:
            raise InvalidConfig(f"{where}: alpha must be in (0, 1), got {alpha}")
        b = _as_int(doc, "b", where, minimum=1, default=default_b)
        return EstimatorSpec(
            kind="sigmoid", label=f"sigmoid({a:g},{alpha:g})", a=a, alpha=alpha, b=b
        )
    if kind == "exp":
        _check_keys(doc, ("kind", "a1", "a2"), (), where)
        a1 = _as_float(doc, "a1", where)
        a2 = _as_float(doc, "a2", where)
        if a1 <= 0.0 or a2 < 0.0:
            raise InvalidConfig(f"{where}: need a1 > 0 and a2 >= 0, got a1={a1}, a2={a2}")
        return EstimatorSpec(kind="exp", label=f"exp({a1:g},{a2:g})", a1=a1, a2=a2)
    raise InvalidConfig(f"unknown estimator kind {kind!r}")


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; ``options`` holds the per-experiment
    extras (grids, ranks, bootstrap knobs, fit inputs) after defaulting."""

    experiment: str
    model: dict
    t_steps: int
    n_reps: int
    seed: int
    threads: int
    estimators: tuple
    options: dict

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise InvalidConfig(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json_dict(doc)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise InvalidConfig("config must be a JSON object")
        experiment = doc.get("experiment")
        parser = _CONFIG_PARSERS.get(experiment)
        if parser is None:
            raise InvalidConfig(
                f"experiment must be one of {sorted(_CONFIG_PARSERS)}, got {experiment!r}"
            )
        return parser(doc)

    def with_overrides(self, seed=None, n_reps=None, threads=None) -> "ExperimentConfig":
        updates = {}
        if seed is not None:
            updates["seed"] = int(seed)
        if n_reps is not None:
            if self.experiment == "fit":
                raise InvalidConfig("--reps does not apply to the fit experiment")
            if n_reps < 1:
                raise InvalidConfig(f"n_reps must be >= 1, got {n_reps}")
            updates["n_reps"] = int(n_reps)
        if threads is not None:
            if threads < 1:
                raise InvalidConfig(f"threads must be >= 1, got {threads}")
            updates["threads"] = int(threads)
        return dataclasses.replace(self, **updates) if updates else self

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "t_steps": self.t_steps,
            "n_reps": self.n_reps,
            "seed": self.seed,
            "threads": self.threads,
            "estimators": [e.label for e in self.estimators],
            "options": {
                k: (list(v) if isinstance(v, (tuple, np.ndarray)) else v)
                for k, v in self.options.items()
            },
        }


def _parse_model(doc, where: str, allowed: tuple, default: dict | None = None) -> dict:
    model = doc.get("model", default)
    if model is None:
        raise InvalidConfig(f"{where}: missing required keys ['model']")
    if not isinstance(model, dict):
        raise InvalidConfig(f"{where}: model must be an object")
    if "params" in model:
        _check_keys(model, ("params",), (), f"{where}.model")
        if "inline" not in allowed:
            raise InvalidConfig(f"{where}: inline model parameters are not supported here")
        params = VecmParams.from_json_dict(model["params"])  # validates now, rebuilt later
        if params.d > 1:
            raise InvalidConfig(f"{where}: simulation studies support single-lag models only")
        return {"params": model["params"]}
    name = model.get("generator")
    if name not in _GENERATORS:
        raise InvalidConfig(
            f"{where}: model.generator must be one of {sorted(_GENERATORS)}, got {name!r}"
        )
    canonical = {"appc2": "rank_two_benchmark", "appc3": "spread_eigs"}.get(name, name)
    if canonical not in allowed:
        raise InvalidConfig(f"{where}: generator {name!r} is not valid for this experiment")
    if canonical == "gamma_c":
        _check_keys(model, ("generator", "p"), (), f"{where}.model")
        return {"generator": "gamma_c", "p": _as_int(model, "p", f"{where}.model", minimum=3)}
    if canonical == "rank_two_benchmark":
        _check_keys(model, ("generator",), ("sigma_seed",), f"{where}.model")
        return {
            "generator": "rank_two_benchmark",
            "sigma_seed": _as_int(model, "sigma_seed", f"{where}.model", minimum=0, default=0),
        }
    _check_keys(model, ("generator",), ("p", "r"), f"{where}.model")
    return {
        "generator": "spread_eigs",
        "p": _as_int(model, "p", f"{where}.model", minimum=3, default=8),
        "r": _as_int(model, "r", f"{where}.model", minimum=2, default=4),
    }


def _model_params(model: dict, **kwargs) -> VecmParams:
    if "params" in model:
        return VecmParams.from_json_dict(model["params"])
    if model["generator"] == "gamma_c":
        return gamma_c_params(model["p"], kwargs["c"], kwargs["t_steps"])
    if model["generator"] == "rank_two_benchmark":
        return rank_two_benchmark_params(model["sigma_seed"])
    return spread_eigs_params(kwargs["lam_min"], model["p"], model["r"])


def _parse_mspe(doc: dict) -> ExperimentConfig:
    where = "mspe config"
    _check_keys(
        doc,
        ("experiment", "model", "n_reps", "seed", "estimators"),
        ("c_grid", "t_steps", "threads", "statistic", "bootstrap_b"),
        where,
    )
    model = _parse_model(doc, where, allowed=("gamma_c", "inline"))
    t_steps = _as_int(doc, "t_steps", where, minimum=10, default=100)
    n_reps = _as_int(doc, "n_reps", where, minimum=1)
    seed = _as_int(doc, "seed", where, minimum=0)
    threads = _as_int(doc, "threads", where, minimum=1, default=1)
    statistic = doc.get("statistic", "trace")
    if statistic not in _STATISTICS:
        raise InvalidConfig(f"{where}: statistic must be one of {_STATISTICS}")
    default_b = _as_int(doc, "bootstrap_b", where, minimum=1, default=299)

    if "generator" in model:
        if "c_grid" not in doc:
            raise InvalidConfig(f"{where}: c_grid is required with the gamma_c generator")
        c_grid = doc["c_grid"]
        if not isinstance(c_grid, list) or not c_grid:
            raise InvalidConfig(f"{where}: c_grid must be a non-empty list")
        c_grid = [float(c) for c in c_grid]
        for c in c_grid:
            gamma_c_params(model["p"], c, t_steps)  # range check now
    else:
        if "c_grid" in doc:
            raise InvalidConfig(f"{where}: c_grid is only valid with the gamma_c generator")
        c_grid = [float("nan")]

    raw = doc["estimators"]
    if not isinstance(raw, list) or not raw:
        raise InvalidConfig(f"{where}: estimators must be a non-empty list")
    estimators = tuple(_parse_estimator(entry, default_b) for entry in raw)
    labels = [e.label for e in estimators]
    if len(set(labels)) != len(labels):
        raise InvalidConfig(f"{where}: duplicate estimator labels {labels}")
    if statistic != "trace" and any(e.kind == "exp" for e in estimators):
        raise InvalidConfig(f"{where}: exp weights require the trace statistic")
    draws = {e.b for e in estimators if e.needs_bootstrap}
    if len(draws) > 1:
        raise InvalidConfig(
            f"{where}: estimators must share one bootstrap draw count, got {sorted(draws)}"
        )
    return ExperimentConfig(
        experiment="mspe",
        model=model,
        t_steps=t_steps,
        n_reps=n_reps,
        seed=seed,
        threads=threads,
        estimators=estimators,
        options={"c_grid": c_grid, "statistic": statistic, "b": draws.pop() if draws else 0},
    )


def _parse_dist_compare(doc: dict) -> ExperimentConfig:
    where = "dist_compare config"
    _check_keys(
        doc,
        ("experiment", "seed"),
        ("model", "t_steps", "n_reps", "ranks", "n_steps", "threads"),
        where,
    )
    model = _parse_model(
        doc, where, allowed=("rank_two_benchmark", "inline"), default={"generator": "rank_two_benchmark"}
    )
    t_steps = _as_int(doc, "t_steps", where, minimum=50, default=5000)
    n_reps = _as_int(doc, "n_reps", where, minimum=2, default=1000)
    seed = _as_int(doc, "seed", where, minimum=0)
    threads = _as_int(doc, "threads", where, minimum=1, default=1)
    n_steps = _as_int(doc, "n_steps", where, minimum=100, default=1000)
    params = _model_params(model)
    if "ranks" in doc:
        ranks = doc["ranks"]
        if not isinstance(ranks, list) or not ranks:
            raise InvalidConfig(f"{where}: ranks must be a non-empty list")
        ranks = [_as_int({"k": k}, "k", f"{where}.ranks", minimum=1) for k in ranks]
        if any(k > params.p for k in ranks):
            raise InvalidConfig(f"{where}: ranks must be <= p={params.p}, got {ranks}")
        if len(set(ranks)) != len(ranks):
            raise InvalidConfig(f"{where}: duplicate ranks {ranks}")
    else:
        ranks = sorted({max(params.r - 1, 1), params.r, params.p})
    return ExperimentConfig(
        experiment="dist_compare",
        model=model,
        t_steps=t_steps,
        n_reps=n_reps,
        seed=seed,
        threads=threads,
        estimators=tuple(
            EstimatorSpec(kind="rrr", label=f"rrr{k}", k=k) for k in ranks
        ),
        options={"ranks": ranks, "n_steps": n_steps},
    )


def _parse_rank_bias(doc: dict) -> ExperimentConfig:
    where = "rank_bias config"
    _check_keys(
        doc,
        ("experiment", "seed"),
        ("model", "lambda_min_grid", "t_steps", "n_reps", "bootstrap_b", "alpha", "statistic", "threads"),
        where,
    )
    model = _parse_model(doc, where, allowed=("spread_eigs",), default={"generator": "spread_eigs", "p": 8, "r": 4})
    grid = doc.get("lambda_min_grid", [0.01, 0.03, 0.1, 0.3])
    if not isinstance(grid, list) or not grid:
        raise InvalidConfig(f"{where}: lambda_min_grid must be a non-empty list")
    grid = [float(v) for v in grid]
    t_steps = _as_int(doc, "t_steps", where, minimum=50, default=200)
    n_reps = _as_int(doc, "n_reps", where, minimum=1, default=200)
    seed = _as_int(doc, "seed", where, minimum=0)
    threads = _as_int(doc, "threads", where, minimum=1, default=1)
    b = _as_int(doc, "bootstrap_b", where, minimum=1, default=299)
    alpha = _as_float(doc, "alpha", where, default=0.05)
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"{where}: alpha must be in (0, 1), got {alpha}")
    statistic = doc.get("statistic", "trace")
    if statistic not in _STATISTICS:
        raise InvalidConfig(f"{where}: statistic must be one of {_STATISTICS}")
    for lam in grid:
        spread_eigs_params(lam, model["p"], model["r"])  # range check now
    return ExperimentConfig(
        experiment="rank_bias",
        model=model,
        t_steps=t_steps,
        n_reps=n_reps,
        seed=seed,
        threads=threads,
        estimators=(),
        options={"lambda_min_grid": grid, "b": b, "alpha": alpha, "statistic": statistic},
    )


def _parse_fit(doc: dict) -> ExperimentConfig:
    where = "fit config"
    _check_keys(
        doc,
        ("experiment", "input"),
        ("estimator", "drift", "lags", "holdout", "seed", "statistic", "bootstrap_b"),
        where,
    )
    if not isinstance(doc["input"], str) or not doc["input"]:
        raise InvalidConfig(f"{where}: input must be a non-empty path string")
    drift = doc.get("drift", "none")
    if drift not in _DRIFTS:
        raise InvalidConfig(f"{where}: drift must be one of {_DRIFTS}, got {drift!r}")
    lags = _as_int(doc, "lags", where, minimum=1, default=1)
    holdout = _as_float(doc, "holdout", where, default=0.1)
    if not 0.0 <= holdout < 1.0:
        raise InvalidConfig(f"{where}: holdout must be in [0, 1), got {holdout}")
    seed = _as_int(doc, "seed", where, minimum=0, default=0)
    statistic = doc.get("statistic", "trace")
    if statistic not in _STATISTICS:
        raise InvalidConfig(f"{where}: statistic must be one of {_STATISTICS}")
    b = _as_int(doc, "bootstrap_b", where, minimum=1, default=299)
    estimator = _parse_estimator(doc.get("estimator", {"kind": "ls"}), b)
    if estimator.needs_bootstrap and lags > 1:
        raise InvalidConfig(f"{where}: bootstrap weights support single-lag models only")
    return ExperimentConfig(
        experiment="fit",
        model={},
        t_steps=0,
        n_reps=1,
        seed=seed,
        threads=1,
        estimators=(estimator,),
        options={
            "input": doc["input"],
            "drift": drift,
            "lags": lags,
            "holdout": holdout,
            "statistic": statistic,
            "b": b,
        },
    )


_CONFIG_PARSERS = {
    "mspe": _parse_mspe,
    "dist_compare": _parse_dist_compare,
    "rank_bias": _parse_rank_bias,
    "fit": _parse_fit,
}


# --------------------------------------------------------------------- output


def _fmt_float(value) -> str:
    return repr(float(value))


def _fmt_int(value) -> str:
    return repr(int(value))


def _write_results(out_dir: Path, columns: list, rows: list) -> Path:
    path = out_dir / "results.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEMA_LINE + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


def _write_meta(out_dir: Path, config: ExperimentConfig, wall: float, extras: dict) -> Path:
    path = out_dir / "meta.json"
    doc = {
        "schema": "v1",
        "config": config.to_json_dict(),
        "versions": {
            "package": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "numba_enabled": NUMBA_ENABLED,
        },
        "wall_time_s": round(wall, 3),
    }
    doc.update(extras)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _run_threaded(n_reps: int, threads: int, worker) -> None:
    """Run worker(start, stop) over disjoint contiguous chunks.

    Replication streams derive from the replication index, and every result
    lands at its replication slot, so the split cannot change any output.
    """
    if threads <= 1 or n_reps <= 1:
        worker(0, n_reps)
        return
    threads = min(threads, n_reps)
    bounds = np.linspace(0, n_reps, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(worker, int(bounds[i]), int(bounds[i + 1])) for i in range(threads)
        ]
        for future in futures:
            future.result()


# ----------------------------------------------------------------------- mspe


def _estimator_weights(spec: EstimatorSpec, lr, cvs_by_alpha: dict, p: int) -> np.ndarray:
    if spec.kind == "rrr":
        return (np.arange(p) < spec.k).astype(float)
    if spec.kind == "ls":
        return np.ones(p)
    if spec.kind == "hard":
        return weights_hard(lr, cvs_by_alpha[spec.alpha]).w
    if spec.kind == "sigmoid":
        return weights_sigmoid(lr, cvs_by_alpha[spec.alpha], spec.a).w
    if spec.kind == "exp":
        return weights_exp(lr, spec.a1, spec.a2).w
    raise InvalidConfig(f"estimator kind {spec.kind!r} is not usable here")


def run_mspe(config: ExperimentConfig, out_dir) -> Path:
    """One-step prediction-error study over the c grid.

    Per replication: draw X₁..X_{T+1} from the cell's model, fit every
    estimator on the first T transitions, score T·‖ΔX_{T+1} − Γ̂X_T‖², and
    record the weight vector each estimator implied. One set of bootstrap
    draws per replication serves every significance level. Rows are ordered
    (c grid) × (estimator list); replication r of cell i uses stream
    seed→child(i)→child(r).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    c_grid = config.options["c_grid"]
    statistic = config.options["statistic"]
    b = config.options["b"]
    n_reps, t_steps, threads = config.n_reps, config.t_steps, config.threads
    estimators = config.estimators
    alphas = sorted({e.alpha for e in estimators if e.needs_bootstrap})

    rows = []
    n_failed_total = 0
    for cell, c in enumerate(c_grid):
        if "params" in config.model:
            params = _model_params(config.model)
        else:
            params = _model_params(config.model, c=c, t_steps=t_steps)
        p = params.p
        for spec in estimators:
            if spec.kind == "rrr" and spec.k > p:
                raise InvalidConfig(f"estimator {spec.label} exceeds dimension p={p}")
        growth = np.eye(p) + params.pi
        if np.max(np.abs(np.linalg.eigvals(growth))) > 1.0 + 1e-8:
            raise Unstable(f"autoregressive spectral radius exceeds 1 in the cell c={c} model")
        cell_stream = RngStream(config.seed).child(cell)
        scores = np.full((len(estimators), n_reps), np.nan)
        weights = np.full((len(estimators), n_reps, p), np.nan)

        def worker(start: int, stop: int) -> None:
            for rep in range(start, stop):
                gen = cell_stream.child(rep).generator()
                shocks = gen.standard_normal((t_steps + 1, p))
                levels = sim_levels(growth, shocks)
                vals, vecs, s_dxx, ok = fit_eigenproblem(levels, t_steps, 1e-12)
                if not ok:
                    continue
                vals = np.clip(vals, 0.0, 1.0 - 1e-12)
                lr = lr_statistics(GenEig(values=vals, vectors=vecs), t_steps, statistic)
                cvs_by_alpha = {}
                if alphas:
                    indices = gen.integers(0, t_steps, size=(p, b, t_steps), dtype=np.int64)
                    stats = bootstrap_statistics(
                        levels[: t_steps + 1], t_steps, vals, vecs, s_dxx,
                        indices, statistic == "trace", 1e-12,
                    )
                    for alpha in alphas:
                        cvs_by_alpha[alpha] = critical_values_from_statistics(
                            stats, alpha, statistic
                        )
                x_last = levels[t_steps]
                dx_next = levels[t_steps + 1] - levels[t_steps]
                for ei, spec in enumerate(estimators):
                    w = _estimator_weights(spec, lr, cvs_by_alpha, p)
                    gamma_hat = s_dxx @ ((vecs * w) @ vecs.T)
                    err = dx_next - gamma_hat @ x_last
                    scores[ei, rep] = t_steps * float(err @ err)
                    weights[ei, rep] = w

        _run_threaded(n_reps, threads, worker)
        ok_mask = np.isfinite(scores[0])
        n_ok = int(ok_mask.sum())
        n_failed_total += n_reps - n_ok
        if n_ok < 2:
            raise NotPositiveDefinite(
                f"cell c={c}: only {n_ok}/{n_reps} replications produced valid fits"
            )
        for ei, spec in enumerate(estimators):
            cell_scores = scores[ei, ok_mask]
            cell_weights = weights[ei, ok_mask]
            row = [
                spec.label,
                _fmt_int(p),
                _fmt_float(c),
                _fmt_float(cell_scores.mean()),
                _fmt_float(cell_scores.std(ddof=1) / np.sqrt(n_ok)),
            ]
            row.extend(_fmt_float(v) for v in cell_weights.mean(axis=0))
            row.extend(_fmt_float(v) for v in cell_weights.std(axis=0, ddof=1))
            rows.append(row)

    p_out = int(rows[0][1]) if rows else 0
    columns = ["estimator", "p", "c", "mspe", "mc_stderr"]
    columns += [f"mean_w{i + 1}" for i in range(p_out)]
    columns += [f"sd_w{i + 1}" for i in range(p_out)]
    path = _write_results(out_dir, columns, rows)
    _write_meta(out_dir, config, time.monotonic() - started, {"n_failed": n_failed_total})
    return path


# --------------------------------------------------------------- dist_compare


def _block_label(i: int, j: int, r: int) -> str:
    return ("1" if i < r else "2") + ("1" if j < r else "2")


def run_dist_compare(config: ExperimentConfig, out_dir) -> Path:
    """Empirical finite-T deviations next to limit-law draws, entry by entry.

    Empirical source: n_reps length-T samples, transformed coordinates, one
    fit served to every requested rank; deviations Γ̂_k − Γ scaled √T on the
    first r columns and T on the rest, with the 11-block recentred by the
    fixed-rank bias when k < r. Asymptotic source: sample_limit_law draws of
    the same scaled limits. Row order: rank × source × entry × sample.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    params = _model_params(config.model)
    p, r = params.p, params.r
    ranks = config.options["ranks"]
    n_steps = config.options["n_steps"]
    n_reps, t_steps, threads = config.n_reps, config.t_steps, config.threads
    if not 0 < r < p:
        raise InvalidRank(f"distribution comparison needs 0 < r < p, got r={r}, p={p}")

    qt = q_transform(params)
    gamma = np.zeros((p, p))
    gamma[:r, :r] = params.beta.T @ params.alpha
    centers = {}
    for k in ranks:
        center = gamma.copy()
        if k < r:
            center[:r, :r] += asymptotic_bias(params, k).b_m
        centers[k] = center
    scale = np.full((1, p), float(t_steps))
    scale[0, :r] = np.sqrt(t_steps)

    root = RngStream(config.seed)
    empirical = np.full((len(ranks), n_reps, p, p), np.nan)
    n_failed = 0

    def worker(start: int, stop: int) -> None:
        for rep in range(start, stop):
            traj = simulate_vecm(params, t_steps, root.child(0).child(rep), check_assumptions=False)
            levels = traj.data @ qt.q.T
            vals, vecs, s_dxx, ok = fit_eigenproblem(levels, t_steps, 1e-12)
            if not ok:
                continue
            for ki, k in enumerate(ranks):
                head = vecs[:, :k]
                gamma_hat = s_dxx @ (head @ head.T)
                empirical[ki, rep] = (gamma_hat - centers[k]) * scale

    _run_threaded(n_reps, threads, worker)

    rows = []
    for ki, k in enumerate(ranks):
        label = f"rrr{k}"
        asym = sample_limit_law(
            params, k, n_reps, root.child(1).child(ki), n_steps=n_steps
        )
        for source, draws in (("empirical", empirical[ki]), ("asymptotic", asym)):
            for i in range(p):
                for j in range(p):
                    block = _block_label(i, j, r)
                    for rep in range(n_reps):
                        value = draws[rep, i, j]
                        if not np.isfinite(value):
                            n_failed += 1
                            continue
                        rows.append(
                            [label, source, block, _fmt_int(i + 1), _fmt_int(j + 1),
                             _fmt_int(rep), _fmt_float(value)]
                        )

    columns = ["estimator", "source", "block", "i", "j", "sample", "value"]
    path = _write_results(out_dir, columns, rows)
    _write_meta(out_dir, config, time.monotonic() - started, {"n_failed": n_failed})
    return path


# ------------------------------------------------------------------ rank_bias


def run_rank_bias(config: ExperimentConfig, out_dir) -> Path:
    """Bootstrap rank-selection histograms and fixed-rank bias norms.

    Per smallest-eigenvalue setting: n_reps trajectories, each rank-selected
    by the sequential bootstrap test (one B-draw bootstrap per replication),
    tallied into a histogram over 0..p; plus ‖b̃_k‖_F for k = 2..r evaluated
    from the model. Rows: per lambda_min, rank_hist rows for k = 0..p then
    bias rows for k = 2..r.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    grid = config.options["lambda_min_grid"]
    b = config.options["b"]
    alpha = config.options["alpha"]
    statistic = config.options["statistic"]
    n_reps, t_steps, threads = config.n_reps, config.t_steps, config.threads

    rows = []
    n_failed = 0
    for li, lam_min in enumerate(grid):
        params = _model_params(config.model, lam_min=lam_min)
        p = params.p
        lam_stream = RngStream(config.seed).child(li)
        selected = np.full(n_reps, -1, dtype=np.int64)

        def worker(start: int, stop: int) -> None:
            for rep in range(start, stop):
                rep_stream = lam_stream.child(rep)
                traj = simulate_vecm(params, t_steps, rep_stream, check_assumptions=False)
                try:
                    cvs = bootstrap_critical_values(
                        traj, kind=statistic, b=b, alpha=alpha, rng=rep_stream.child(0)
                    )
                except (BootstrapFailed, NotPositiveDefinite):
                    continue  # counted as failed; excluded from the histogram
                lr = lr_statistics(coint_eig(cross_covariances(traj)), t_steps, statistic)
                selected[rep] = select_rank(lr, cvs)

        _run_threaded(n_reps, threads, worker)
        n_failed += int((selected < 0).sum())
        for k in range(p + 1):
            count = int((selected == k).sum())
            rows.append(["rank_hist", _fmt_float(lam_min), _fmt_int(k), _fmt_int(count)])
        for k in range(2, params.r + 1):
            norm = float(np.linalg.norm(asymptotic_bias(params, k).b_tilde))
            rows.append(["bias", _fmt_float(lam_min), _fmt_int(k), _fmt_float(norm)])

    columns = ["kind", "lambda_min", "k", "value"]
    path = _write_results(out_dir, columns, rows)
    _write_meta(out_dir, config, time.monotonic() - started, {"n_failed": n_failed})
    return path


# ------------------------------------------------------------------------ fit


def _load_trials(input_path) -> tuple[list, list]:
    path = Path(input_path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ParseError(f"{path}: directory contains no .csv files")
    elif path.is_file():
        files = [path]
    else:
        raise ParseError(f"{input_path}: no such file or directory")
    trials = []
    for file in files:
        if file.stat().st_size == 0:
            raise ParseError(f"{file}: empty file")
        trials.append(Trajectory.from_csv(file))
    return trials, [file.name for file in files]


def _train_split(trials: list, holdout: float) -> tuple[list, list]:
    """Split each trial into a training trajectory and held-out transitions."""
    train, held = [], []
    for trial in trials:
        n_hold = int(np.floor(holdout * trial.t_steps))
        if trial.t_steps - n_hold < 2:
            raise TooShort(
                f"holdout={holdout} leaves {trial.t_steps - n_hold} transitions to fit on"
            )
        cut = trial.data.shape[0] - n_hold
        train.append(Trajectory(data=trial.data[:cut], coordinate_system=trial.coordinate_system))
        held.append(n_hold)
    return train, held


def _holdout_mspe(trial: Trajectory, n_hold: int, pi_hat, psis, mu) -> float | None:
    """Mean squared one-step-ahead error over the trial's final transitions."""
    if n_hold == 0:
        return None
    data = trial.data
    dy = np.diff(data, axis=0)
    total = 0.0
    t_last = data.shape[0] - 1
    for t in range(t_last - n_hold + 1, t_last + 1):
        pred = mu + pi_hat @ data[t - 1]
        for i, psi in enumerate(psis, start=1):
            pred = pred + psi @ dy[t - 1 - i]
        total += float(np.sum((dy[t - 1] - pred) ** 2))
    return total / n_hold


def run_fit(config: ExperimentConfig, out_dir) -> Path:
    """Pooled estimation on user trials plus a held-out prediction report.

    Writes ``fit.json`` with the coefficient estimate, eigenvalues, rank
    statistics, applied weights, and per-trial held-out one-step MSPE.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    opts = config.options
    spec = config.estimators[0]
    trials, names = _load_trials(opts["input"])
    train, held = _train_split(trials, opts["holdout"])
    d = opts["lags"]
    drift = opts["drift"]

    conc = concentrate_lags(train, d, drift)
    s = conc.to_cross_covariances()
    eig = coint_eig(s)
    lr = lr_statistics(eig, s.t_effective, opts["statistic"])

    cvs = None
    if spec.needs_bootstrap:
        cvs = bootstrap_critical_values(
            train, kind=opts["statistic"], b=spec.b, alpha=spec.alpha,
            rng=RngStream(config.seed),
        )
    if spec.kind == "rrr":
        if spec.k > s.p:
            raise InvalidConfig(f"rank {spec.k} exceeds dimension p={s.p}")
        result = rrr_estimate(s, spec.k)
        w = (np.arange(s.p) < spec.k).astype(float)
    elif spec.kind == "ls":
        result = ls_estimate(s)
        w = np.ones(s.p)
    else:
        if spec.kind == "hard":
            wv = weights_hard(lr, cvs)
        elif spec.kind == "sigmoid":
            wv = weights_sigmoid(lr, cvs, spec.a)
        else:
            wv = weights_exp(lr, spec.a1, spec.a2)
        result = weighted_estimate(s, wv)
        w = wv.w

    pi_hat = result.pi_hat
    psis = psi_estimate(train, pi_hat, d, drift) if d > 1 else ()
    mu = np.zeros(s.p)
    if drift == "constant":
        diffs = np.concatenate([np.diff(t.data, axis=0)[d - 1 :] for t in train])
        lagged = np.concatenate([t.data[d - 1 : -1] for t in train])
        mu = diffs.mean(axis=0) - pi_hat @ lagged.mean(axis=0)
        for i, psi in enumerate(psis, start=1):
            lag_i = np.concatenate([np.diff(t.data, axis=0)[d - 1 - i : -i] for t in train])
            mu = mu - psi @ lag_i.mean(axis=0)

    per_trial = {}
    pooled_num, pooled_den = 0.0, 0
    for trial, n_hold, name in zip(trials, held, names):
        value = _holdout_mspe(trial, n_hold, pi_hat, psis, mu)
        per_trial[name] = value
        if value is not None:
            pooled_num += value * n_hold
            pooled_den += n_hold

    report = {
        "estimator": result.to_json_dict(),
        "label": spec.label,
        "weights": [float(v) for v in w],
        "eigenvalues": [float(v) for v in eig.values],
        "lr": lr.to_json_dict(),
        "critical_values": cvs.to_json_dict() if cvs is not None else None,
        "drift": drift,
        "lags": d,
        "n_trials": len(trials),
        "t_effective": s.t_effective,
        "psi_hat": [[float(v) for v in psi.ravel()] for psi in psis],
        "holdout_fraction": opts["holdout"],
        "holdout_mspe": per_trial,
        "pooled_holdout_mspe": (pooled_num / pooled_den) if pooled_den else None,
    }
    path = out_dir / "fit.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_meta(out_dir, config, time.monotonic() - started, {})
    return path


# ------------------------------------------------------------------------ CLI


_RUNNERS = {
    "mspe": run_mspe,
    "dist_compare": run_dist_compare,
    "rank_bias": run_rank_bias,
    "fit": run_fit,
}

_CONFIG_ERRORS = (
    InvalidConfig,
    ParseError,
    TooShort,
    InvalidRank,
    InvalidWeights,
    DimensionMismatch,
)
_NUMERICAL_ERRORS = (
    Unstable,
    NotPositiveDefinite,
    EigenvalueOutOfRange,
    DegenerateSpectrum,
    BootstrapFailed,
    SingularQ,
    RankDeficient,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cointrr",
        description="Reduced-rank cointegration experiments: simulation studies and data fitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, experiment in (
        ("mspe", "mspe"),
        ("dist-compare", "dist_compare"),
        ("rank-bias", "rank_bias"),
        ("fit", "fit"),
    ):
        cmd = sub.add_parser(command, help=f"run the {experiment} experiment")
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--reps", type=int, default=None, help="override replication count")
        cmd.add_argument("--threads", type=int, default=None, help="override worker threads")
        cmd.set_defaults(experiment=experiment)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.load(args.config)
        if config.experiment != args.experiment:
            raise InvalidConfig(
                f"config is for {config.experiment!r}, but the {args.experiment!r} "
                "command was invoked"
            )
        config = config.with_overrides(seed=args.seed, n_reps=args.reps, threads=args.threads)
        path = _RUNNERS[config.experiment](config, args.out)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CointrrError as exc:  # anything typed but unforeseen counts as numerical
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
