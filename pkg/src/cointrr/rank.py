"""Rank statistics, sequential selection, bootstrap critical values, weights.

The likelihood-ratio statistics lr_0..lr_{p−1} test the hypotheses
H(k): rank(Π) ≤ k. Sequential selection returns the first non-rejected k
(or p when every hypothesis is rejected). Critical values come from an
i.i.d. residual bootstrap under each fitted H(k) model. The three weight
families map the statistics to eigenvector weights: a hard indicator
(post-selection), an exponential soft threshold, and an erf sigmoid around
the critical value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ._kernels import bootstrap_statistics, fit_eigenproblem
from .errors import (
    BootstrapFailed,
    DimensionMismatch,
    EigenvalueOutOfRange,
    InvalidConfig,
    NotPositiveDefinite,
)
from .estimate import WeightVector, coint_eig, cross_covariances, rrr_estimate
from .matops import GenEig
from .simulate import Trajectory

_KINDS = ("trace", "max_eig")


@dataclass(frozen=True)
class LrSequence:
    """Statistics lr_0..lr_{p−1}; the trace kind is nonincreasing in index."""

    kind: str
    values: np.ndarray
    t_effective: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidConfig(f"kind must be one of {_KINDS}, got {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch(f"lr values must be a nonempty vector, got {values.shape}")
        if np.any(values < -1e-12) or not np.all(np.isfinite(values)):
            raise EigenvalueOutOfRange("lr statistics must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.size

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "values": [float(v) for v in self.values],
            "t_effective": int(self.t_effective),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LrSequence":
        return cls(
            kind=doc["kind"],
            values=np.asarray(doc["values"], dtype=float),
            t_effective=int(doc["t_effective"]),
        )


@dataclass(frozen=True)
class CriticalValues:
    """Per-hypothesis thresholds c_0..c_{p−1} plus provenance."""

    values: np.ndarray
    source: dict

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch(f"critical values must be a nonempty vector, got {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidConfig("critical values must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.size

    def to_json_dict(self) -> dict:
        return {"values": [float(v) for v in self.values], "source": dict(self.source)}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CriticalValues":
        return cls(values=np.asarray(doc["values"], dtype=float), source=dict(doc["source"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "CriticalValues":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def lr_statistics(eig: GenEig, t_effective: int, kind: str = "trace") -> LrSequence:
    """lr_k = −T Σ_{i>k} log(1−λ̂_i) (trace) or −T log(1−λ̂_{k+1}) (max_eig)."""
    if kind not in _KINDS:
        raise InvalidConfig(f"kind must be one of {_KINDS}, got {kind!r}")
    vals = np.asarray(eig.values, dtype=float)
    if np.any(vals >= 1.0) or np.any(vals < 0.0):
        raise EigenvalueOutOfRange(f"eigenvalues must lie in [0, 1), got range [{vals.min()}, {vals.max()}]")
    logs = -np.log1p(-vals)
    if kind == "trace":
        values = t_effective * np.cumsum(logs[::-1])[::-1]
    else:
        values = t_effective * logs
    return LrSequence(kind=kind, values=values, t_effective=int(t_effective))


def select_rank(lr: LrSequence, c: CriticalValues) -> int:
    """First k with lr_k ≤ c_k; p when every hypothesis is rejected (inf ∅)."""
    if lr.p != c.p:
        raise DimensionMismatch(f"lr has {lr.p} entries, critical values {c.p}")
    hits = np.nonzero(lr.values <= c.values)[0]
    return int(hits[0]) if hits.size else lr.p


def weights_hard(lr: LrSequence, c: CriticalValues) -> WeightVector:
    """Post-selection indicator: w_i = 1 exactly for i ≤ r̂ = select_rank(lr, c)."""
    r_hat = select_rank(lr, c)
    return WeightVector(w=(np.arange(lr.p) < r_hat).astype(float))


def weights_exp(lr: LrSequence, a1: float, a2: float) -> WeightVector:
    """Soft weights ŵ_i = 1 − exp(−a1·T^{−a2}·lr_{i−1}) ∈ [0, 1).

    Monotonicity of the result is inherited from the statistic sequence, so
    only the trace kind is accepted.
    """
    if a1 <= 0 or a2 < 0:
        raise InvalidConfig(f"need a1 > 0 and a2 >= 0, got a1={a1}, a2={a2}")
    if lr.kind != "trace":
        raise InvalidConfig("exponential weights require the (nonincreasing) trace statistics")
    scale = a1 * float(lr.t_effective) ** (-a2)
    return WeightVector(w=1.0 - np.exp(-scale * lr.values))


def weights_sigmoid(lr: LrSequence, c: CriticalValues, a: float) -> WeightVector:
    """Sigmoid weights ŵ_i = τ(a·(lr_{i−1} − c_{i−1})) with τ(x) = (erf(x)+1)/2.

    A running minimum enforces the nonincreasing weight invariant, which raw
    sigmoid values can violate for max_eig statistics or non-monotone
    critical values.
    """
    if a <= 0:
        raise InvalidConfig(f"need a > 0, got {a}")
    if lr.p != c.p:
        raise DimensionMismatch(f"lr has {lr.p} entries, critical values {c.p}")
    raw = (erf(a * (lr.values - c.values)) + 1.0) / 2.0
    return WeightVector(w=np.minimum.accumulate(raw))


def _single_trial_bootstrap(levels, b, kind, rng):
    """Kernel-backed bootstrap for one trajectory (the hot path)."""
    n_fit = levels.shape[0] - 1
    p = levels.shape[1]
    vals, vecs, s_dxx, ok = fit_eigenproblem(levels, n_fit, 1e-12)
    if not ok:
        raise NotPositiveDefinite("sample moments are degenerate; cannot bootstrap")
    indices = rng.generator().integers(0, n_fit, size=(p, b, n_fit), dtype=np.int64)
    return bootstrap_statistics(levels, n_fit, vals, vecs, s_dxx, indices, kind == "trace", 1e-12)


def _pooled_bootstrap(trials, b, kind, rng):
    """Plain-numpy bootstrap pooling residuals across several trajectories."""
    p = trials[0].p
    s = cross_covariances(trials)
    stats = np.full((p, b), np.nan)
    generator = rng.generator()
    for k in range(p):
        pi_k = rrr_estimate(s, k).pi_hat
        pooled = np.concatenate(
            [np.diff(t.data, axis=0) - t.data[:-1] @ pi_k.T for t in trials]
        )
        pooled = pooled - pooled.mean(axis=0)
        growth = np.eye(p) + pi_k
        lengths = [t.t_steps for t in trials]
        for j in range(b):
            regenerated = []
            for t_len in lengths:
                rows = pooled[generator.integers(0, pooled.shape[0], size=t_len)]
                path = np.zeros((t_len + 1, p))
                for t in range(t_len):
                    path[t + 1] = growth @ path[t] + rows[t]
                regenerated.append(Trajectory(data=path))
            try:
                eig = coint_eig(cross_covariances(regenerated))
                stats[k, j] = lr_statistics(eig, s.t_effective, kind).values[k]
            except (NotPositiveDefinite, EigenvalueOutOfRange):
                continue
    return stats


def bootstrap_critical_values(
    trials,
    kind: str = "trace",
    b: int = 299,
    alpha: float = 0.05,
    rng=None,
) -> CriticalValues:
    """Bootstrap the (1−α) null quantile of lr_k for each hypothesis H(k).

    Each hypothesis fits the rank-k model on the data, recenters its
    residuals, resamples them i.i.d., regenerates trajectories under the
    fitted model and recomputes the statistic. Degenerate draws are skipped;
    fewer than b/2 successes for any hypothesis is an error. Deterministic
    given the RngStream, and independent of the numba/fallback choice.
    """
    if isinstance(trials, Trajectory):
        trials = [trials]
    if kind not in _KINDS:
        raise InvalidConfig(f"kind must be one of {_KINDS}, got {kind!r}")
    if b < 1:
        raise InvalidConfig(f"need b >= 1 bootstrap replicates, got {b}")
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    if rng is None:
        raise InvalidConfig("bootstrap_critical_values needs an explicit RngStream")
    if len(trials) == 1:
        stats = _single_trial_bootstrap(trials[0].data, b, kind, rng)
    else:
        stats = _pooled_bootstrap(trials, b, kind, rng)
    return critical_values_from_statistics(stats, alpha, kind)


def critical_values_from_statistics(
    stats: np.ndarray, alpha: float, kind: str = "trace"
) -> CriticalValues:
    """Per-hypothesis (1−α) quantiles of bootstrap statistics, NaN-aware.

    ``stats`` is (p, B) with NaN marking degenerate draws; fewer than B/2
    successes for any hypothesis raises BootstrapFailed. Shared by
    :func:`bootstrap_critical_values` and the experiment runners, which reuse
    one set of draws for several significance levels.
    """
    stats = np.asarray(stats, dtype=float)
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must be in (0, 1), got {alpha}")
    p, b = stats.shape
    values = np.empty(p)
    n_failed = 0
    for k in range(p):
        finite = stats[k][np.isfinite(stats[k])]
        n_failed += b - finite.size
        if finite.size < max(b / 2.0, 1.0):
            raise BootstrapFailed(
                f"hypothesis H({k}): only {finite.size}/{b} bootstrap draws succeeded"
            )
        values[k] = np.quantile(finite, 1.0 - alpha)
    return CriticalValues(
        values=values,
        source={"kind": "bootstrap", "b": int(b), "alpha": float(alpha), "statistic": kind, "n_failed": int(n_failed)},
    )
