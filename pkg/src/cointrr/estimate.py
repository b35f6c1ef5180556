"""Cross-covariances, the sample eigenproblem, and reduced-rank estimators.

The estimators all share one object: the generalized eigendecomposition of
(S_XΔX S_ΔXΔX⁻¹ S_ΔXX, S_XX) built from pooled cross-covariances. A fixed-rank
estimator keeps the leading k eigenvector directions, a weighted estimator
mixes all p of them with weights in [0, 1], and least squares is the k = p
special case. Lag concentration (for models with short-run dynamics) reduces
the multi-lag problem to the same eigenproblem on residual series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EigenvalueOutOfRange,
    InvalidConfig,
    InvalidRank,
    InvalidWeights,
    NotPositiveDefinite,
    TooShort,
)
from .matops import GenEig, gsym_eig
from .simulate import Trajectory

_DRIFTS = ("none", "constant")


@dataclass(frozen=True)
class CrossCovariances:
    """Pooled sample moments S_XX, S_ΔXX, S_XΔX, S_ΔXΔX.

    ``t_effective`` is the exact summand count (pooled over trials), the
    normalizer of every matrix; ``s_xdx`` is stored as the exact transpose of
    ``s_dxx``.
    """

    s_xx: np.ndarray
    s_dxx: np.ndarray
    s_dxdx: np.ndarray
    t_effective: int
    n_trials: int
    drift: str = "none"
    coordinate_system: str = "original"

    @property
    def s_xdx(self) -> np.ndarray:
        return self.s_dxx.T

    @property
    def p(self) -> int:
        return self.s_xx.shape[0]


@dataclass(frozen=True)
class WeightVector:
    """Eigenvector weights: nonincreasing, each in [0, 1].

    The boundary conventions w_0 = 1 and w_{p+1} = 0 make the mixture
    decomposition Γ̂_w = Σ_k (w_k − w_{k+1}) Γ̂_k a convex combination of the
    fixed-rank estimators.
    """

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidWeights(f"weights must be a nonempty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidWeights("weights contain non-finite entries")
        if np.min(w) < 0.0 or np.max(w) > 1.0:
            raise InvalidWeights(f"weights must lie in [0, 1], got range [{w.min()}, {w.max()}]")
        if np.any(np.diff(w) > 1e-12):
            raise InvalidWeights("weights must be nonincreasing")
        object.__setattr__(self, "w", w)

    @property
    def p(self) -> int:
        return self.w.size

    def mixture_coefficients(self) -> np.ndarray:
        """W_0..W_p with W_k = w_k − w_{k+1}, w_0 = 1, w_{p+1} = 0; sums to 1."""
        padded = np.concatenate([[1.0], self.w, [0.0]])
        return padded[:-1] - padded[1:]


@dataclass(frozen=True)
class EstimatorResult:
    """A fitted coefficient matrix plus the eigenproblem it came from."""

    pi_hat: np.ndarray
    rank_spec: dict
    eig: GenEig | None
    coordinate_system: str = "original"
    drift: str = "none"

    def to_json_dict(self) -> dict:
        p = self.pi_hat.shape[0]
        doc = {
            "p": p,
            "pi_hat": [float(v) for v in self.pi_hat.ravel()],
            "rank_spec": {
                k: ([float(x) for x in v] if isinstance(v, np.ndarray) else v)
                for k, v in self.rank_spec.items()
            },
            "coordinate_system": self.coordinate_system,
            "drift": self.drift,
        }
        if self.eig is not None:
            doc["eigenvalues"] = [float(v) for v in self.eig.values]
        return doc


def _pooled_arrays(trials, what: str):
    if isinstance(trials, Trajectory):
        trials = [trials]
    if not trials:
        raise TooShort(f"{what} needs at least one trajectory")
    p = trials[0].p
    system = trials[0].coordinate_system
    for t in trials:
        if t.p != p:
            raise DimensionMismatch(f"mixed dimensions in trials: {t.p} vs {p}")
        if t.coordinate_system != system:
            raise DimensionMismatch("mixed coordinate systems in trials")
    return trials, p, system


def cross_covariances(trials, drift: str = "none") -> CrossCovariances:
    """Pool x_{t−1}/Δx_t moments over one or more trajectories.

    ``drift = "constant"`` subtracts the pooled sample means of Δx_t and
    x_{t−1} before forming products (equivalent to an intercept regressor).
    """
    trials, p, system = _pooled_arrays(trials, "cross_covariances")
    if drift not in _DRIFTS:
        raise InvalidConfig(f"drift must be one of {_DRIFTS}, got {drift!r}")
    lagged = np.concatenate([t.data[:-1] for t in trials])
    diffs = np.concatenate([np.diff(t.data, axis=0) for t in trials])
    count = lagged.shape[0]
    if count < p + 1:
        raise TooShort(f"need at least p+1 = {p + 1} pooled transitions, got {count}")
    if drift == "constant":
        lagged = lagged - lagged.mean(axis=0)
        diffs = diffs - diffs.mean(axis=0)
    s_xx = lagged.T @ lagged / count
    s_dxdx = diffs.T @ diffs / count
    s_dxx = diffs.T @ lagged / count
    return CrossCovariances(
        s_xx=(s_xx + s_xx.T) / 2.0,
        s_dxx=s_dxx,
        s_dxdx=(s_dxdx + s_dxdx.T) / 2.0,
        t_effective=count,
        n_trials=len(trials),
        drift=drift,
        coordinate_system=system,
    )


def coint_eig(s: CrossCovariances) -> GenEig:
    """Solve gsym_eig(S_XΔX S_ΔXΔX⁻¹ S_ΔXX, S_XX); values are squared
    canonical correlations between Δx_t and x_{t−1}, so they lie in [0, 1]."""
    try:
        m = s.s_xdx @ np.linalg.solve(s.s_dxdx, s.s_dxx)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("S_dXdX is singular") from None
    eig = gsym_eig((m + m.T) / 2.0, s.s_xx)
    vals = eig.values
    if vals[0] > 1.0 + 1e-8:
        raise EigenvalueOutOfRange(f"sample eigenvalue {vals[0]:.6f} above 1")
    return GenEig(values=np.clip(vals, 0.0, 1.0), vectors=eig.vectors)


def rrr_estimate(s: CrossCovariances, k: int) -> EstimatorResult:
    """Rank-k estimator Π̂_k = S_ΔXX Ĝ^{:k}(Ĝ^{:k})ᵀ (zero matrix for k = 0)."""
    if not 0 <= k <= s.p:
        raise InvalidRank(f"rank must be in 0..{s.p}, got {k}")
    eig = coint_eig(s)
    pi_hat = s.s_dxx @ eig.projector_sum(k)
    return EstimatorResult(
        pi_hat=pi_hat,
        rank_spec={"kind": "fixed", "k": k},
        eig=eig,
        coordinate_system=s.coordinate_system,
        drift=s.drift,
    )


def weighted_estimate(s: CrossCovariances, w) -> EstimatorResult:
    """Weighted estimator Π̂_w = S_ΔXX Σ_i w_i ĝ_iĝ_iᵀ.

    Algebraically the mixture Σ_k W_k Π̂_k of fixed-rank estimators with
    W_k = w_k − w_{k+1}.
    """
    if not isinstance(w, WeightVector):
        w = WeightVector(w=np.asarray(w, dtype=float))
    if w.p != s.p:
        raise DimensionMismatch(f"weights have length {w.p}, need {s.p}")
    eig = coint_eig(s)
    pi_hat = s.s_dxx @ ((eig.vectors * w.w) @ eig.vectors.T)
    return EstimatorResult(
        pi_hat=pi_hat,
        rank_spec={"kind": "weighted", "w": w.w.copy()},
        eig=eig,
        coordinate_system=s.coordinate_system,
        drift=s.drift,
    )


def ls_estimate(s: CrossCovariances) -> EstimatorResult:
    """Least squares Π̂_LS = S_ΔXX S_XX⁻¹, computed without the eigenproblem."""
    try:
        np.linalg.cholesky(s.s_xx)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("S_XX is not positive definite") from None
    pi_hat = np.linalg.solve(s.s_xx, s.s_dxx.T).T
    return EstimatorResult(
        pi_hat=pi_hat,
        rank_spec={"kind": "ls"},
        eig=None,
        coordinate_system=s.coordinate_system,
        drift=s.drift,
    )


@dataclass(frozen=True)
class LagConcentration:
    """Residual series of the short-run concentration step.

    ``r0``/``r1`` are the residuals of Δy_t and y_{t−1} after projecting out
    the lagged differences (and the constant, under drift); feeding them into
    the eigenproblem via :meth:`to_cross_covariances` reduces the d-lag model
    to the single-lag machinery.
    """

    r0: np.ndarray
    r1: np.ndarray
    lag_regressors: np.ndarray
    d: int
    drift: str
    coordinate_system: str
    n_trials: int

    def to_cross_covariances(self) -> CrossCovariances:
        count = self.r0.shape[0]
        s_xx = self.r1.T @ self.r1 / count
        s_dxdx = self.r0.T @ self.r0 / count
        return CrossCovariances(
            s_xx=(s_xx + s_xx.T) / 2.0,
            s_dxx=self.r0.T @ self.r1 / count,
            s_dxdx=(s_dxdx + s_dxdx.T) / 2.0,
            t_effective=count,
            n_trials=self.n_trials,
            drift=self.drift,
            coordinate_system=self.coordinate_system,
        )


def _lagged_design(trials, d: int):
    """Stack (Δy_t, y_{t−1}, lagged-difference regressors) rows over trials."""
    diffs_rows, lag_rows, level_rows = [], [], []
    for trial in trials:
        data = trial.data
        t_total = data.shape[0] - 1
        if t_total < d:
            continue
        dy = np.diff(data, axis=0)
        for t in range(d, t_total + 1):
            diffs_rows.append(dy[t - 1])
            level_rows.append(data[t - 1])
            if d > 1:
                lag_rows.append(np.concatenate([dy[t - 1 - i] for i in range(1, d)]))
    if not diffs_rows:
        raise TooShort(f"no usable rows for lag order d={d}")
    lag = np.array(lag_rows) if d > 1 else np.zeros((len(diffs_rows), 0))
    return np.array(diffs_rows), np.array(level_rows), lag


def concentrate_lags(trials, d: int, drift: str = "none") -> LagConcentration:
    """Project Δy_t and y_{t−1} on the d−1 lagged differences; return residuals.

    d = 1 is a passthrough (residuals are the raw series, demeaned under
    drift). The cross-covariances of (r0, r1) feed :func:`coint_eig` unchanged.
    """
    trials, p, system = _pooled_arrays(trials, "concentrate_lags")
    if d < 1:
        raise InvalidConfig(f"lag order d must be >= 1, got {d}")
    if drift not in _DRIFTS:
        raise InvalidConfig(f"drift must be one of {_DRIFTS}, got {drift!r}")
    diffs, levels, lag = _lagged_design(trials, d)
    count = diffs.shape[0]
    if count < p * d + p + 1:
        raise TooShort(f"need more than {p * d + p} usable rows for d={d}, got {count}")
    if drift == "constant":
        diffs = diffs - diffs.mean(axis=0)
        levels = levels - levels.mean(axis=0)
        lag = lag - lag.mean(axis=0) if lag.size else lag
    if d > 1:
        coef0, *_ = np.linalg.lstsq(lag, diffs, rcond=None)
        coef1, *_ = np.linalg.lstsq(lag, levels, rcond=None)
        r0 = diffs - lag @ coef0
        r1 = levels - lag @ coef1
    else:
        r0, r1 = diffs, levels
    return LagConcentration(
        r0=r0,
        r1=r1,
        lag_regressors=lag,
        d=d,
        drift=drift,
        coordinate_system=system,
        n_trials=len(trials),
    )


def psi_estimate(trials, pi_hat: np.ndarray, d: int, drift: str = "none") -> tuple:
    """OLS of Δy_t − Π̂y_{t−1} on the lagged differences; () when d = 1."""
    if d < 1:
        raise InvalidConfig(f"lag order d must be >= 1, got {d}")
    if d == 1:
        return ()
    trials, p, _ = _pooled_arrays(trials, "psi_estimate")
    diffs, levels, lag = _lagged_design(trials, d)
    if diffs.shape[0] < p * d + 1:
        raise TooShort(f"need more than {p * d} usable rows for d={d}")
    response = diffs - levels @ pi_hat.T
    if drift == "constant":
        response = response - response.mean(axis=0)
        lag = lag - lag.mean(axis=0)
    coef, *_ = np.linalg.lstsq(lag, response, rcond=None)
    return tuple(coef[(i - 1) * p : i * p].T for i in range(1, d))
