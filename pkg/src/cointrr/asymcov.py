"""Closed-form asymptotics for reduced-rank estimators of cointegrated systems.

Autocovariances γ_k of the stacked stationary process X̃_t = (ΔX_tᵀ, X_{1,t−1}ᵀ)ᵀ,
the fourth-moment matrix Ξ governing the CLT of the sample covariance S_X̃X̃,
the Jacobian ξ of the estimator map h(M) = M₁₂ Σ_{k≤m} v_k v_kᵀ, the under-rank
covariance ξΞξᵀ, and the deterministic ingredients (b_w, C₁w, D₂, ξ_w) of the
weighted-estimator limit law.

All vectorizations are column-major (:func:`cointrr.matops.vec`), so the
Jacobian row for the (i, j) entry of a p×r block sits at j·p + i and identities
like vec(MXN) = (Nᵀ⊗M)vec(X) apply verbatim.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    InvalidConfig,
    InvalidRank,
    Unstable,
)
from .estimate import WeightVector
from .matops import commutation_matrix
from .model import (
    PopulationMoments,
    VecmParams,
    population_eigs,
    population_moments,
)

__all__ = [
    "MaCoefficients",
    "BigXiResult",
    "XiJacobian",
    "WeightLimit",
    "XiMatrices",
    "ma_coefficients",
    "acov_xtilde",
    "big_xi",
    "xi_jacobian",
    "under_rank_cov",
    "under_rank_block21",
    "weight_asymptotics",
    "xi_matrices",
]

#: Hard cap on the autocovariance horizon regardless of the requested tolerance.
HORIZON_CAP = 20_000


@dataclass(frozen=True)
class MaCoefficients:
    """Truncated MA(∞) representation X̃_t = Σ_s Ψ_s U_{t−s}.

    ``psi_0`` is the lag-zero (p+r)×p matrix and ``psi_s[j]`` is Ψ_{j+1};
    ``trunc_error`` bounds Σ_{s>S}‖Ψ_s‖_F over the discarded tail.
    """

    psi_0: np.ndarray
    psi_s: tuple[np.ndarray, ...]
    trunc_error: float

    @property
    def horizon(self) -> int:
        return len(self.psi_s)


@dataclass(frozen=True)
class BigXiResult:
    """Truncated fourth-moment matrix Ξ with its horizon and tail bound.

    ``assumes_zero_cumulants`` records that the vanishing-fourth-cumulant
    condition on the shocks is assumed, not verified (it holds for Gaussian
    noise; user-supplied noise is the caller's responsibility).
    """

    matrix: np.ndarray
    horizon: int
    trunc_error: float
    assumes_zero_cumulants: bool = True


@dataclass(frozen=True)
class XiJacobian:
    """Jacobian ξ of the estimator map at the population covariance.

    ``xi`` is the p·r × (p+r)² derivative of vec(h(M)) for the requested m;
    ``xi_i[i]`` differentiates the single projector v_i v_iᵀ, ``f_i[i]`` the
    shifted pencil numerator M₂₁M₁₁⁻¹M₁₂ − λ_i M₂₂, and ``terms[i]`` is the
    i-th increment of ξ, so ξ = Σ_{i<m} terms[i] and a weighted Jacobian is
    Σ_i w_i·terms[i].
    """

    xi: np.ndarray
    xi_i: tuple[np.ndarray, ...]
    f_i: tuple[np.ndarray, ...]
    terms: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class WeightLimit:
    """Deterministic ingredients of the weighted-estimator limit law.

    ``b_w`` recentres and ``c1w`` contracts the stationary rows; ``d2`` =
    diag(w_{r+1..p}) parameterizes the path-random projector mixture
    C₂w = G₂₂ D₂ G₂₂ᵀ, which has no deterministic summary and is evaluated per
    Brownian path by the limit-law sampler. ``xi_w`` is the weighted Jacobian
    and ``xi_w_cov`` = ξ_w Ξ ξ_wᵀ the Gaussian left-column covariance.
    """

    b_w: np.ndarray
    c1w: np.ndarray
    d2: np.ndarray
    xi_w: np.ndarray
    xi_w_cov: np.ndarray


def _check_mixed_rank(params: VecmParams) -> None:
    if not 0 < params.r < params.p:
        raise InvalidRank(
            f"asymptotics need a mixed system 0 < r < p, got r={params.r}, p={params.p}"
        )


def _check_tol(trunc_tol: float) -> None:
    if not 0.0 < trunc_tol < 1.0:
        raise InvalidConfig(f"trunc_tol must lie in (0, 1), got {trunc_tol}")


def _spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def _horizon(rho: float, trunc_tol: float) -> int:
    """Summation horizon ceil(log tol / log ρ) from the stationary-block radius."""
    if rho <= 0.0:
        return 1
    k = math.ceil(math.log(trunc_tol) / math.log(rho))
    return int(min(max(k, 1), HORIZON_CAP))


def _stacked_sigma(mom: PopulationMoments, ba: np.ndarray, p: int, r: int) -> np.ndarray:
    """Σ_X̃ = [[Σ_ΔX, (βᵀαΣ_X^{11}; 0)], [·ᵀ, Σ_X^{11}]] assembled exactly."""
    top_right = np.zeros((p, r))
    top_right[:r] = ba @ mom.sigma_x11
    out = np.zeros((p + r, p + r))
    out[:p, :p] = mom.sigma_dx
    out[:p, p:] = top_right
    out[p:, :p] = top_right.T
    out[p:, p:] = mom.sigma_x11
    return out


def ma_coefficients(params: VecmParams, *, trunc_tol: float = 1e-12) -> MaCoefficients:
    """MA(∞) coefficients of the stacked stationary process, truncated.

    Ψ₀ = [[I_r, 0], [0, I_n], [0, 0]] and, for s ≥ 1,
    Ψ_s = [[βᵀα A^{s−1}, 0], [0, 0], [A^{s−1}, 0]] with A = I_r + βᵀα.
    The horizon starts at ceil(log trunc_tol / log ρ(A)) and is extended until
    ‖Ψ_S‖_F falls below trunc_tol relative to Ψ₁ (hard cap HORIZON_CAP).
    """
    _check_mixed_rank(params)
    _check_tol(trunc_tol)
    p, r, n = params.p, params.r, params.n
    ba = params.beta.T @ params.alpha
    a = np.eye(r) + ba
    rho = _spectral_radius(a)
    if rho >= 1.0:
        raise Unstable(f"stationary block has spectral radius {rho:.6f} >= 1")

    psi_0 = np.zeros((p + r, p))
    psi_0[:r, :r] = np.eye(r)
    psi_0[r:p, r:] = np.eye(n)

    def coeff(a_pow: np.ndarray) -> np.ndarray:
        psi = np.zeros((p + r, p))
        psi[:r, :r] = ba @ a_pow
        psi[p:, :r] = a_pow
        return psi

    horizon = _horizon(rho, trunc_tol)
    coeffs: list[np.ndarray] = []
    a_pow = np.eye(r)
    scale = 0.0
    while True:
        psi = coeff(a_pow)
        nrm = float(np.linalg.norm(psi))
        if not coeffs:
            scale = max(nrm, np.finfo(float).tiny)
        if len(coeffs) >= horizon and (nrm < trunc_tol * scale or len(coeffs) >= HORIZON_CAP):
            break
        coeffs.append(psi)
        a_pow = a_pow @ a

    # Discarded-tail bound: keep multiplying until the terms are far below
    # double precision, then close with a geometric remainder at a rate that
    # dominates ρ (transients of a non-normal A decay no slower eventually).
    tail = 0.0
    floor = 1e-18 * scale
    budget = 8 * len(coeffs) + 400
    for _ in range(budget):
        nrm = float(np.linalg.norm(coeff(a_pow)))
        tail += nrm
        a_pow = a_pow @ a
        if nrm < floor:
            break
    rate = min(max(rho, 0.9), 0.999999)
    trunc_error = tail + nrm * rate / (1.0 - rate)
    return MaCoefficients(psi_0=psi_0, psi_s=tuple(coeffs), trunc_error=trunc_error)


def acov_xtilde(params: VecmParams, k: int) -> np.ndarray:
    """Lag-k autocovariance γ_k = E[X̃_0 X̃_kᵀ] of the stacked process.

    Computed through the truncated MA sum Σ_{s≥0} Ψ_s Σ_U Ψ_{s+k}ᵀ with the
    tail below 1e-12 relative; negative lags return γ_{−k} = γ_kᵀ. γ₀
    reproduces the stacked covariance assembled from population_moments.
    """
    k = int(k)
    if k < 0:
        return acov_xtilde(params, -k).T
    ma = ma_coefficients(params, trunc_tol=1e-12)
    sigma_u = population_moments(params).sigma_u
    psis = [ma.psi_0, *ma.psi_s]
    out = np.zeros((params.p + params.r, params.p + params.r))
    for s in range(max(len(psis) - k, 0)):
        out += psis[s] @ sigma_u @ psis[s + k].T
    return out


def _companion(ba: np.ndarray, p: int, r: int) -> np.ndarray:
    """VAR(1) transition L̃ of X̃_t: X̃_{t+1} = L̃ X̃_t + Ψ₀ U_{t+1}.

    Rows follow from ΔX_{1,t+1} = βᵀα(ΔX_{1,t} + X_{1,t−1}) + U_{1,t+1},
    ΔX_{2,t+1} = U_{2,t+1} and X_{1,t} = ΔX_{1,t} + X_{1,t−1}, giving
    γ_{k+1} = γ_k L̃ᵀ for every k ≥ 0.
    """
    lt = np.zeros((p + r, p + r))
    lt[:r, :r] = ba
    lt[:r, p:] = ba
    lt[p:, :r] = np.eye(r)
    lt[p:, p:] = np.eye(r)
    return lt


def _gamma_path(params: VecmParams, trunc_tol: float) -> tuple[list[np.ndarray], float]:
    """γ_0..γ_K by the companion recursion, plus a bound on the discarded tail.

    The bound is 4·Σ_{k>K}‖γ_k‖_F², valid for ‖Ξ_exact − Ξ_K‖_F because each
    dropped lag contributes γ_k⊗γ_k and its transpose, and the commutation
    factor has unit spectral norm; the sum is accumulated numerically until
    the terms are negligible at double precision.
    """
    _check_mixed_rank(params)
    _check_tol(trunc_tol)
    p, r = params.p, params.r
    mom = population_moments(params)
    ba = params.beta.T @ params.alpha
    rho = _spectral_radius(np.eye(r) + ba)
    lt = _companion(ba, p, r).T

    gamma0 = _stacked_sigma(mom, ba, p, r)
    scale = max(float(np.linalg.norm(gamma0)), np.finfo(float).tiny)
    horizon = _horizon(rho, trunc_tol)
    gammas = [gamma0]
    gam = gamma0
    while (
        len(gammas) - 1 < horizon or np.linalg.norm(gammas[-1]) >= trunc_tol * scale
    ) and len(gammas) - 1 < HORIZON_CAP:
        gam = gam @ lt
        gammas.append(gam)

    tail_sq = 0.0
    floor = min(1e-16, trunc_tol * 1e-4) * scale
    budget = 8 * len(gammas) + 1000
    nrm_sq = 0.0
    for _ in range(budget):
        gam = gam @ lt
        nrm = float(np.linalg.norm(gam))
        nrm_sq = nrm * nrm
        tail_sq += nrm_sq
        if nrm < floor:
            break
    trunc_error = 4.0 * (tail_sq + nrm_sq)
    return gammas, trunc_error


def big_xi(params: VecmParams, trunc_tol: float = 1e-10) -> BigXiResult:
    """Asymptotic covariance Ξ of √T vec(S_X̃X̃ − Σ_X̃).

    Ξ = Σ_k γ_k⊗γ_k + I_{(p+r,p+r)} Σ_k γ_k⊗γ_k, summed over |k| ≤ K. The
    horizon K starts at ceil(log trunc_tol / log ρ) with ρ the spectral radius
    of I_r + βᵀα and is extended until ‖γ_K‖_F < trunc_tol·‖γ₀‖_F (hard cap
    HORIZON_CAP); lags come from the companion recursion γ_{k+1} = γ_k L̃ᵀ.
    ``trunc_error`` bounds the Frobenius norm of everything discarded.
    """
    gammas, trunc_error = _gamma_path(params, trunc_tol)
    acc = np.kron(gammas[0], gammas[0])
    for gam in gammas[1:]:
        term = np.kron(gam, gam)
        acc += term + term.T
    dim = gammas[0].shape[0]
    xi = acc + commutation_matrix(dim, dim) @ acc
    xi = (xi + xi.T) / 2.0
    return BigXiResult(matrix=xi, horizon=len(gammas) - 1, trunc_error=trunc_error)


def xi_jacobian(params: VecmParams, m: int, *, gap_tol: float = 1e-8) -> XiJacobian:
    """Jacobian of the map h(M) = M₁₂ Σ_{k≤m} v_k v_kᵀ at M = Σ_X̃.

    v_i solve M₂₁M₁₁⁻¹M₁₂ v = λ M₂₂ v with vᵀM₂₂v = 1; at the base point these
    are the population eigenpairs, so P_i = G₁₁e_i(G₁₁e_i)ᵀ. Derivatives are
    taken along symmetric perturbations (the domain of covariance matrices):

        ξ_i = Σ_{j≠i} (λ_i−λ_j)⁻¹ (P_i⊗P_j + P_j⊗P_i) F_i − (0, P_i)⊗(0, P_i)
        F_i = ( W ⊗ (−W, I_r),  I_r ⊗ (W, −λ_i I_r) ),  W = Σ_XΔX Σ_ΔX⁻¹
        ξ   = Σ_{i≤m} (0, P_i)⊗(I_p, 0) + (I_r ⊗ Σ_ΔXX) ξ_i

    A simple population spectrum is required: any consecutive eigenvalue gap
    below gap_tol·λ₁ raises DegenerateSpectrum.
    """
    _check_mixed_rank(params)
    p, r = params.p, params.r
    if not 1 <= m <= r:
        raise InvalidRank(f"the Jacobian is defined for 1 <= m <= r, got m={m}, r={r}")
    mom = population_moments(params)
    eig = population_eigs(params, mom)
    lam = eig.lambda11
    if r > 1:
        gap = float(np.min(lam[:-1] - lam[1:]))
        if gap < gap_tol * max(lam[0], np.finfo(float).tiny):
            raise DegenerateSpectrum(
                f"population eigenvalue gap {gap:.3e} below {gap_tol:.1e} x lambda_1"
            )

    ba = params.beta.T @ params.alpha
    sigma_xdx = np.zeros((r, p))
    sigma_xdx[:, :r] = mom.sigma_x11 @ ba.T
    w = np.linalg.solve(mom.sigma_dx, sigma_xdx.T).T
    sigma_dxx = sigma_xdx.T
    projectors = [np.outer(eig.g11[:, i], eig.g11[:, i]) for i in range(r)]
    eye_r = np.eye(r)
    left_pad = np.hstack([np.eye(p), np.zeros((p, r))])

    xi_i: list[np.ndarray] = []
    f_i: list[np.ndarray] = []
    terms: list[np.ndarray] = []
    for i in range(r):
        f = np.hstack(
            [
                np.kron(w, np.hstack([-w, eye_r])),
                np.kron(eye_r, np.hstack([w, -lam[i] * eye_r])),
            ]
        )
        mix = np.zeros((r * r, r * r))
        for j in range(r):
            if j != i:
                mix += (
                    np.kron(projectors[i], projectors[j])
                    + np.kron(projectors[j], projectors[i])
                ) / (lam[i] - lam[j])
        z_i = np.hstack([np.zeros((r, p)), projectors[i]])
        d_proj = mix @ f - np.kron(z_i, z_i)
        xi_i.append(d_proj)
        f_i.append(f)
        terms.append(np.kron(z_i, left_pad) + np.kron(eye_r, sigma_dxx) @ d_proj)

    xi = np.zeros((p * r, (p + r) * (p + r)))
    for term in terms[:m]:
        xi += term
    return XiJacobian(xi=xi, xi_i=tuple(xi_i), f_i=tuple(f_i), terms=tuple(terms))


def under_rank_cov(
    params: VecmParams,
    m: int,
    *,
    trunc_tol: float = 1e-10,
    gap_tol: float = 1e-8,
) -> np.ndarray:
    """Asymptotic covariance ξΞξᵀ of the recentred rank-m left column.

    Returns the p·r × p·r covariance of √T vec(Γ̂_m^{·1} − Γ^{·1} − (b_m; 0))
    in transformed coordinates, column-major over the p×r block (so the rows
    with index j·p + i, i ≥ r belong to the random-walk block; see
    :func:`under_rank_block21`).
    """
    jac = xi_jacobian(params, m, gap_tol=gap_tol)
    cov = jac.xi @ big_xi(params, trunc_tol).matrix @ jac.xi.T
    return (cov + cov.T) / 2.0


def under_rank_block21(cov: np.ndarray, p: int, r: int) -> np.ndarray:
    """Sub-covariance of the random-walk rows of a p·r left-column covariance.

    Selects the vec entries j·p + i with i ≥ r, i.e. the covariance of
    √T vec(Γ̂_m^{21} − Γ₂₁) alone.
    """
    cov = np.asarray(cov, dtype=float)
    if not 0 < r < p:
        raise InvalidRank(f"block extraction needs 0 < r < p, got r={r}, p={p}")
    if cov.shape != (p * r, p * r):
        raise DimensionMismatch(f"covariance must be {p * r}x{p * r}, got {cov.shape}")
    idx = np.array([j * p + i for j in range(r) for i in range(r, p)])
    return cov[np.ix_(idx, idx)]


def weight_asymptotics(
    params: VecmParams,
    weights,
    *,
    trunc_tol: float = 1e-10,
    gap_tol: float = 1e-8,
) -> WeightLimit:
    """Limit-law ingredients for the weighted estimator with fixed weights.

    With D₁ = diag(w_1..w_r) and G₁₁ the population eigenvectors:

        b_w  = βᵀα Σ_X^{11} G₁₁ (D₁ − I_r) G₁₁ᵀ
        C₁w  = βᵀα Σ_X^{11} G₁₁ D₁ G₁₁ᵀ (βᵀα)⁻¹
        ξ_w  = Σ_{i≤r} w_i · (i-th Jacobian increment)

    b_w is the large-T limit of Γ̂_w^{11} − Γ₁₁ (the limit−truth convention of
    :func:`cointrr.model.asymptotic_bias`). Hard indicator weights collapse
    every quantity to its fixed-rank analogue, and w ≡ 1 gives b_w = 0,
    C₁w = I_r through G₁₁G₁₁ᵀ = (Σ_X^{11})⁻¹.
    """
    _check_mixed_rank(params)
    p, r = params.p, params.r
    wv = weights if isinstance(weights, WeightVector) else WeightVector(np.asarray(weights, dtype=float))
    if wv.p != p:
        raise DimensionMismatch(f"need one weight per coordinate: got {wv.p}, expected {p}")
    w = wv.w
    mom = population_moments(params)
    eig = population_eigs(params, mom)
    ba = params.beta.T @ params.alpha
    g11 = eig.g11
    d1 = np.diag(w[:r])
    d2 = np.diag(w[r:])
    b_w = ba @ mom.sigma_x11 @ g11 @ (d1 - np.eye(r)) @ g11.T
    c1w = ba @ mom.sigma_x11 @ g11 @ d1 @ g11.T @ np.linalg.inv(ba)

    jac = xi_jacobian(params, r, gap_tol=gap_tol)
    xi_w = np.zeros_like(jac.xi)
    for weight, term in zip(w[:r], jac.terms):
        xi_w += weight * term
    cov = xi_w @ big_xi(params, trunc_tol).matrix @ xi_w.T
    return WeightLimit(
        b_w=b_w, c1w=c1w, d2=d2, xi_w=xi_w, xi_w_cov=(cov + cov.T) / 2.0
    )


@dataclass(frozen=True)
class XiMatrices:
    """Aggregate of the asymptotic-covariance matrices for external cross-checks.

    Holds Ξ, the Jacobian ξ with its per-index projector derivatives, and the
    γ_k sequence the truncation actually summed. The JSON form is binary-free:
    explicit dims plus row-major flattened arrays.
    """

    p: int
    r: int
    m: int
    big_xi: np.ndarray
    xi: np.ndarray
    xi_i: tuple[np.ndarray, ...]
    gamma_k: tuple[np.ndarray, ...]

    def to_json_dict(self) -> dict:
        def flat(a: np.ndarray) -> list[float]:
            return [float(x) for x in a.ravel()]

        return {
            "p": self.p,
            "r": self.r,
            "m": self.m,
            "horizon": len(self.gamma_k) - 1,
            "big_xi": flat(self.big_xi),
            "xi": flat(self.xi),
            "xi_i": [flat(a) for a in self.xi_i],
            "gamma_k": [flat(a) for a in self.gamma_k],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def xi_matrices(
    params: VecmParams,
    m: int,
    *,
    trunc_tol: float = 1e-10,
    gap_tol: float = 1e-8,
) -> XiMatrices:
    """Bundle Ξ, ξ, the per-index ξ_i and the summed γ_k for export."""
    gammas, _ = _gamma_path(params, trunc_tol)
    bx = big_xi(params, trunc_tol)
    jac = xi_jacobian(params, m, gap_tol=gap_tol)
    return XiMatrices(
        p=params.p,
        r=params.r,
        m=m,
        big_xi=bx.matrix,
        xi=jac.xi,
        xi_i=jac.xi_i,
        gamma_k=tuple(gammas),
    )
