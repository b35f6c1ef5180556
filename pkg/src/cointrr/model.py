"""Model specification and exact population quantities.

A cointegrated error-correction system ΔY_t = ΠY_{t−1} + Σ_i Ψ_i ΔY_{t−i} + Z_t
with Π = αβᵀ of rank r is carried around as :class:`VecmParams`. This module
checks the standing assumptions (unit-root structure, transversality,
simple leading eigenvalues), builds the coordinate change that separates the
stationary block from the random-walk block, and evaluates the population
moments, population eigenvalues and the closed-form asymptotic bias of
rank-restricted estimators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidRank,
    NotPositiveDefinite,
    ParseError,
    RankDeficient,
    SingularQ,
    Unstable,
)
from .matops import gsym_eig, orth_complement

__all__ = [
    "VecmParams",
    "QTransform",
    "PopulationMoments",
    "PopulationEig",
    "I1Report",
    "BiasResult",
    "check_i1_conditions",
    "q_transform",
    "population_moments",
    "population_eigs",
    "asymptotic_bias",
]


def _full_column_rank(a: np.ndarray, name: str) -> None:
    if a.shape[1] == 0:
        return
    s = np.linalg.svd(a, compute_uv=False)
    tol = max(a.shape) * np.finfo(float).eps * s[0] if s[0] > 0 else 0.0
    if s[-1] <= tol:
        raise RankDeficient(f"{name} must have full column rank {a.shape[1]}")


@dataclass(frozen=True)
class VecmParams:
    """Parameters (α, β, Σ_Z, optional lag matrices) of the error-correction model.

    ``alpha`` and ``beta`` are p×r with full column rank; rank r = 0 is encoded
    by empty (p×0) matrices and means Π = 0. ``lag_coeffs`` holds the
    short-run matrices Ψ_1..Ψ_{d−1} (empty tuple for the lag-free model).
    """

    alpha: np.ndarray
    beta: np.ndarray
    sigma_z: np.ndarray
    lag_coeffs: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        sigma_z = np.asarray(self.sigma_z, dtype=float)
        if sigma_z.ndim != 2 or sigma_z.shape[0] != sigma_z.shape[1]:
            raise DimensionMismatch(f"sigma_z must be square, got shape {sigma_z.shape}")
        p = sigma_z.shape[0]
        if alpha.size == 0:
            alpha = alpha.reshape(p, 0)
        if beta.size == 0:
            beta = beta.reshape(p, 0)
        if alpha.shape[0] != p or beta.shape[0] != p:
            raise DimensionMismatch(
                f"alpha/beta must have {p} rows to match sigma_z, got {alpha.shape} and {beta.shape}"
            )
        if alpha.shape[1] != beta.shape[1]:
            raise DimensionMismatch(
                f"alpha and beta must agree in column count, got {alpha.shape} and {beta.shape}"
            )
        if alpha.shape[1] > p:
            raise InvalidRank(f"rank {alpha.shape[1]} exceeds dimension {p}")
        if not (
            np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.all(np.isfinite(sigma_z))
        ):
            raise DimensionMismatch("model matrices must be finite")
        if np.max(np.abs(sigma_z - sigma_z.T)) > 1e-8 * max(np.max(np.abs(sigma_z)), 1.0):
            raise NotPositiveDefinite("sigma_z must be symmetric")
        sigma_z = (sigma_z + sigma_z.T) / 2.0
        if np.min(np.linalg.eigvalsh(sigma_z)) <= 0:
            raise NotPositiveDefinite("sigma_z must be positive definite")
        _full_column_rank(alpha, "alpha")
        _full_column_rank(beta, "beta")
        lags = tuple(np.asarray(m, dtype=float) for m in self.lag_coeffs)
        for i, m in enumerate(lags):
            if m.shape != (p, p):
                raise DimensionMismatch(f"lag matrix {i + 1} must be {p}x{p}, got {m.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma_z", sigma_z)
        object.__setattr__(self, "lag_coeffs", lags)

    @property
    def p(self) -> int:
        return self.sigma_z.shape[0]

    @property
    def r(self) -> int:
        return self.alpha.shape[1]

    @property
    def n(self) -> int:
        """Dimension of the random-walk block, p − r."""
        return self.p - self.r

    @property
    def d(self) -> int:
        """Autoregressive lag order (1 when no short-run matrices)."""
        return len(self.lag_coeffs) + 1

    @property
    def pi(self) -> np.ndarray:
        """Level-correction matrix Π = αβᵀ (the zero matrix when r = 0)."""
        if self.r == 0:
            return np.zeros((self.p, self.p))
        return self.alpha @ self.beta.T

    def to_json_dict(self) -> dict:
        """JSON-ready dict with row-major arrays plus explicit dimensions."""
        return {
            "p": self.p,
            "r": self.r,
            "alpha": [float(x) for x in self.alpha.ravel()],
            "beta": [float(x) for x in self.beta.ravel()],
            "sigma_z": [float(x) for x in self.sigma_z.ravel()],
            "lags": [[float(x) for x in m.ravel()] for m in self.lag_coeffs],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "VecmParams":
        """Inverse of :meth:`to_json_dict`; also accepts nested-list matrices."""
        try:
            p = int(doc["p"])
            r = int(doc["r"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"model document needs integer 'p' and 'r': {exc}") from exc

        def grab(key: str, rows: int, cols: int) -> np.ndarray:
            raw = np.asarray(doc.get(key, []), dtype=float)
            if raw.ndim == 1:
                if raw.size != rows * cols:
                    raise ParseError(
                        f"'{key}' has {raw.size} entries, expected {rows}x{cols}"
                    )
                return raw.reshape(rows, cols)
            if raw.shape != (rows, cols):
                raise ParseError(f"'{key}' has shape {raw.shape}, expected {(rows, cols)}")
            return raw

        lags = tuple(
            np.asarray(m, dtype=float).reshape(p, p) for m in doc.get("lags", [])
        )
        return cls(
            alpha=grab("alpha", p, r),
            beta=grab("beta", p, r),
            sigma_z=grab("sigma_z", p, p),
            lag_coeffs=lags,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "VecmParams":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_json_dict(doc)


@dataclass(frozen=True)
class QTransform:
    """Coordinate change separating stationary and random-walk blocks.

    ``q`` stacks βᵀ on top of α_⊥ᵀ; ``gamma = q Π q⁻¹`` is block upper-left:
    its only nonzero block is the r×r corner βᵀα.
    """

    q: np.ndarray
    q_inv: np.ndarray
    gamma: np.ndarray

    def sigma_u(self, sigma_z: np.ndarray) -> np.ndarray:
        """Innovation covariance in transformed coordinates, QΣ_ZQᵀ."""
        out = self.q @ sigma_z @ self.q.T
        return (out + out.T) / 2.0


@dataclass(frozen=True)
class PopulationMoments:
    """Exact stationary covariance Σ_X^{11}, difference covariance Σ_ΔX and Σ_U."""

    sigma_x11: np.ndarray
    sigma_dx: np.ndarray
    sigma_u: np.ndarray


@dataclass(frozen=True)
class PopulationEig:
    """Population eigenvalues λ_1..λ_r (descending) and G₁₁ with G₁₁ᵀΣ_X^{11}G₁₁ = I."""

    lambda11: np.ndarray
    g11: np.ndarray


@dataclass(frozen=True)
class I1Report:
    """Assumption report: unit-root count, stability, transversality, simple spectrum.

    ``lambda_gaps`` holds consecutive differences λ_i − λ_{i+1} of the
    population eigenvalues so callers needing only a single gap (the weaker
    sufficient condition for a fixed rank m) can inspect it directly.
    """

    n_unit_roots: int
    stable: bool
    a2_ok: bool
    a3_ok: bool
    lambda_gaps: np.ndarray


@dataclass(frozen=True)
class BiasResult:
    """Asymptotic bias of the rank-m estimator: transformed (b_m), original (b_tilde),
    and the contraction matrix C_m entering the mixed limit law."""

    b_m: np.ndarray
    b_tilde: np.ndarray
    c_m: np.ndarray


def _companion_eigenvalues(params: VecmParams) -> np.ndarray:
    """Eigenvalues of the companion matrix of the level-VAR representation."""
    p, d = params.p, params.d
    pi = params.pi
    if d == 1:
        return np.linalg.eigvals(np.eye(p) + pi)
    psis = params.lag_coeffs
    a = [np.eye(p) + pi + psis[0]]
    for i in range(1, d - 1):
        a.append(psis[i] - psis[i - 1])
    a.append(-psis[d - 2])
    comp = np.zeros((p * d, p * d))
    comp[:p, :] = np.hstack(a)
    comp[p:, : p * (d - 1)] = np.eye(p * (d - 1))
    return np.linalg.eigvals(comp)


def _gamma_blocks(params: VecmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(q, q_inv, gamma) including the degenerate ranks r = 0 and r = p (q = I)."""
    p, r = params.p, params.r
    if r == 0:
        return np.eye(p), np.eye(p), np.zeros((p, p))
    if r == p:
        return np.eye(p), np.eye(p), params.pi
    qt = q_transform(params)
    return qt.q, qt.q_inv, qt.gamma


def check_i1_conditions(
    params: VecmParams,
    *,
    unit_tol: float = 1e-8,
    stability_margin: float = 1e-8,
    gap_tol: float = 1e-8,
) -> I1Report:
    """Report on the unit-root structure and regularity assumptions.

    ``n_unit_roots`` counts companion eigenvalues μ with |μ − 1| < unit_tol;
    ``stable`` requires every other root to satisfy |μ| < 1 − stability_margin;
    ``a2_ok`` checks that α_⊥ᵀβ_⊥ is well conditioned (smallest singular value
    above ``unit_tol``); ``a3_ok`` checks that the r leading population
    eigenvalues are simple with gaps above ``gap_tol``.
    """
    mu = _companion_eigenvalues(params)
    at_one = np.abs(mu - 1.0) < unit_tol
    n_unit = int(np.count_nonzero(at_one))
    stable = bool(np.all(np.abs(mu[~at_one]) < 1.0 - stability_margin))

    p, r = params.p, params.r
    if r == 0 or r == p:
        a2_ok = True
    else:
        a_perp = orth_complement(params.alpha)
        b_perp = orth_complement(params.beta)
        s = np.linalg.svd(a_perp.T @ b_perp, compute_uv=False)
        a2_ok = bool(s[-1] > unit_tol)

    if r == 0:
        gaps = np.zeros(0)
        a3_ok = True
    else:
        try:
            eig = population_eigs(params)
            gaps = -np.diff(eig.lambda11)
            a3_ok = bool(gaps.size == 0 or np.min(gaps) > gap_tol)
        except (Unstable, SingularQ, NotPositiveDefinite):
            gaps = np.full(max(r - 1, 0), np.nan)
            a3_ok = False
    return I1Report(n_unit_roots=n_unit, stable=stable, a2_ok=a2_ok, a3_ok=a3_ok, lambda_gaps=gaps)


def q_transform(params: VecmParams) -> QTransform:
    """Build Q = (β, α_⊥)ᵀ, its inverse, and Γ = QΠQ⁻¹ (requires 0 < r < p)."""
    p, r = params.p, params.r
    if not 0 < r < p:
        raise InvalidRank(f"q_transform needs 0 < r < p, got r={r}, p={p}")
    alpha, beta = params.alpha, params.beta
    a_perp = orth_complement(alpha)
    b_perp = orth_complement(beta)
    q = np.vstack([beta.T, a_perp.T])

    ba = beta.T @ alpha
    ab_perp = a_perp.T @ b_perp
    # Q⁻¹ = (α(βᵀα)⁻¹, β_⊥(α_⊥ᵀβ_⊥)⁻¹); both inverses exist iff Q is invertible.
    for name, mat in (("βᵀα", ba), ("α_⊥ᵀβ_⊥", ab_perp)):
        s = np.linalg.svd(mat, compute_uv=False)
        if s[-1] <= 1e-12 * max(s[0], 1.0):
            raise SingularQ(f"{name} is numerically singular; coordinate change undefined")
    q_inv = np.hstack([alpha @ np.linalg.inv(ba), b_perp @ np.linalg.inv(ab_perp)])

    gamma = np.zeros((p, p))
    gamma[:r, :r] = ba
    resid = q @ params.pi @ q_inv - gamma
    if np.max(np.abs(resid)) > 1e-8 * max(1.0, np.max(np.abs(ba))):
        raise SingularQ("coordinate change failed to block-diagonalize the model")
    return QTransform(q=q, q_inv=q_inv, gamma=gamma)


def _sigma_x11(gamma11: np.ndarray, sigma_u11: np.ndarray) -> np.ndarray:
    """Solve Σ = AΣAᵀ + Σ_U^{11} with A = I_r + βᵀα via the Kronecker linear system."""
    r = gamma11.shape[0]
    if r == 0:
        return np.zeros((0, 0))
    a = np.eye(r) + gamma11
    rho = np.max(np.abs(np.linalg.eigvals(a)))
    if rho >= 1.0:
        raise Unstable(f"stationary block has spectral radius {rho:.6f} >= 1")
    lhs = np.eye(r * r) - np.kron(a, a)
    sol = np.linalg.solve(lhs, sigma_u11.ravel(order="F"))
    sigma = sol.reshape((r, r), order="F")
    return (sigma + sigma.T) / 2.0


def population_moments(params: VecmParams) -> PopulationMoments:
    """Exact second moments of the transformed process (stationary block and differences)."""
    p, r = params.p, params.r
    q, _, gamma = _gamma_blocks(params)
    sigma_u = q @ params.sigma_z @ q.T
    sigma_u = (sigma_u + sigma_u.T) / 2.0
    gamma11 = gamma[:r, :r]
    sigma_x11 = _sigma_x11(gamma11, sigma_u[:r, :r])
    sigma_dx = sigma_u.copy()
    if r > 0:
        sigma_dx[:r, :r] = sigma_u[:r, :r] + gamma11 @ sigma_x11 @ gamma11.T
    sigma_dx = (sigma_dx + sigma_dx.T) / 2.0
    return PopulationMoments(sigma_x11=sigma_x11, sigma_dx=sigma_dx, sigma_u=sigma_u)


def population_eigs(params: VecmParams, moments: PopulationMoments | None = None) -> PopulationEig:
    """Population squared canonical correlations between X₁_{t−1} and ΔX_t.

    Solves M g = λ Σ_X^{11} g with M = Σ_X^{11} αᵀβ (Σ_ΔX⁻¹)_{11} βᵀα Σ_X^{11};
    the r values lie in [0, 1) and G₁₁ is Σ_X^{11}-orthonormal.
    """
    r = params.r
    if r == 0:
        return PopulationEig(lambda11=np.zeros(0), g11=np.zeros((0, 0)))
    mom = moments if moments is not None else population_moments(params)
    _, _, gamma = _gamma_blocks(params)
    gamma11 = gamma[:r, :r]
    dx_inv_11 = np.linalg.inv(mom.sigma_dx)[:r, :r]
    m = mom.sigma_x11 @ gamma11.T @ dx_inv_11 @ gamma11 @ mom.sigma_x11
    eig = gsym_eig(m, mom.sigma_x11)
    vals = np.clip(eig.values, 0.0, None)
    if np.any(vals >= 1.0):
        raise Unstable(f"population eigenvalue {np.max(vals):.6f} outside [0, 1)")
    return PopulationEig(lambda11=vals, g11=eig.vectors)


def asymptotic_bias(params: VecmParams, m: int) -> BiasResult:
    """Asymptotic bias of the rank-m estimator for m ≤ r, plus the contraction C_m.

    Bias here follows the standard convention limit(estimator) − truth:

    b_m = −βᵀα Σ_X^{11} Σ_{i>m} g_i g_iᵀ (r×r, transformed coordinates),
    b̃_m = −α Σ_X^{11} Σ_{i>m} g_i g_iᵀ βᵀ (p×p, original coordinates),
    C_m = βᵀα Σ_X^{11} Σ_{i≤m} g_i g_iᵀ (βᵀα)⁻¹.

    The rank-m limit of the 11-block is βᵀα Σ_X^{11} Σ_{i≤m} g_i g_iᵀ, and
    subtracting Γ₁₁ = βᵀα Σ_X^{11} G₁₁G₁₁ᵀ leaves exactly b_m above, so
    recentering the estimator by b_m is what removes the first-order error.
    At m = r both biases vanish and C_r = I_r.
    """
    r = params.r
    if not 1 <= m <= r:
        raise InvalidRank(f"bias is defined for 1 <= m <= r, got m={m}, r={r}")
    mom = population_moments(params)
    eig = population_eigs(params, mom)
    _, _, gamma = _gamma_blocks(params)
    gamma11 = gamma[:r, :r]

    tail = eig.g11[:, m:] @ eig.g11[:, m:].T
    head = eig.g11[:, :m] @ eig.g11[:, :m].T
    b_m = -gamma11 @ mom.sigma_x11 @ tail
    b_tilde = -params.alpha @ mom.sigma_x11 @ tail @ params.beta.T
    c_m = gamma11 @ mom.sigma_x11 @ head @ np.linalg.inv(gamma11)
    return BiasResult(b_m=b_m, b_tilde=b_tilde, c_m=c_m)
