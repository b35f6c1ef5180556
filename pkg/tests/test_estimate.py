"""Tests for cross-covariances, the sample eigenproblem and the estimators."""

import numpy as np
import pytest
import scipy.stats

from cointrr.errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidRank,
    InvalidWeights,
    NotPositiveDefinite,
    TooShort,
)
from cointrr.estimate import (
    CrossCovariances,
    WeightVector,
    coint_eig,
    concentrate_lags,
    cross_covariances,
    ls_estimate,
    psi_estimate,
    rrr_estimate,
    weighted_estimate,
)
from cointrr.model import VecmParams, population_eigs
from cointrr.simulate import RngStream, Trajectory, sample_brownian_functionals, simulate_trials, simulate_vecm

from cases import four_dim_rank_two_params
from oracles import reference_rrr, squared_canonical_correlations

rng_oracle = np.random.default_rng


def random_trajectory(seed, t_steps=200, p=3):
    return Trajectory(data=np.cumsum(rng_oracle(seed).standard_normal((t_steps + 1, p)), axis=0))


# ------------------------------------------------------------ cross-covariances


def test_cross_covariances_match_direct_sums():
    traj = random_trajectory(0)
    s = cross_covariances([traj])
    x = traj.data[:-1]
    dx = np.diff(traj.data, axis=0)
    assert s.t_effective == 200
    assert np.allclose(s.s_xx, x.T @ x / 200, atol=1e-12)
    assert np.allclose(s.s_dxx, dx.T @ x / 200, atol=1e-12)
    assert np.allclose(s.s_dxdx, dx.T @ dx / 200, atol=1e-12)
    assert np.array_equal(s.s_xdx, s.s_dxx.T)


def test_cross_covariances_pooling_idempotent():
    traj = random_trajectory(1)
    single = cross_covariances([traj])
    double = cross_covariances([traj, traj])
    assert double.t_effective == 2 * single.t_effective
    for name in ("s_xx", "s_dxx", "s_dxdx"):
        a, b = getattr(single, name), getattr(double, name)
        assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


def test_cross_covariances_constant_path():
    data = np.ones((50, 2)) * np.array([3.0, -1.0])
    s = cross_covariances([Trajectory(data=data)])
    assert np.abs(s.s_dxx).max() == 0.0
    assert np.abs(s.s_dxdx).max() == 0.0


def test_cross_covariances_drift_centers_products():
    traj = Trajectory(data=random_trajectory(2).data + 100.0)
    s = cross_covariances([traj], drift="constant")
    x = traj.data[:-1]
    dx = np.diff(traj.data, axis=0)
    xc = x - x.mean(axis=0)
    dc = dx - dx.mean(axis=0)
    assert np.allclose(s.s_dxx, dc.T @ xc / len(xc), atol=1e-10)


def test_cross_covariances_errors():
    with pytest.raises(TooShort):
        cross_covariances([])
    with pytest.raises(DimensionMismatch):
        cross_covariances([random_trajectory(0, p=2), random_trajectory(1, p=3)])
    with pytest.raises(TooShort):
        cross_covariances([Trajectory(data=np.zeros((3, 4)) + np.arange(4))])
    with pytest.raises(InvalidConfig):
        cross_covariances([random_trajectory(0)], drift="quadratic")


def test_large_sample_covariance_matches_population():
    """S_XX of the stationary block converges to sigma_x11."""
    from cointrr.model import population_moments, q_transform

    params = four_dim_rank_two_params()
    traj = simulate_vecm(params, 100000, RngStream(seed=4))
    qt = q_transform(params)
    transformed = Trajectory(data=traj.data @ qt.q.T, coordinate_system="q_transformed")
    s = cross_covariances([transformed])
    sigma_x11 = population_moments(params).sigma_x11
    assert np.abs(s.s_xx[:2, :2] - sigma_x11).max() < 0.02 * np.abs(sigma_x11).max()


# ------------------------------------------------------------------ coint_eig


def test_coint_eig_scalar_is_squared_correlation():
    traj = Trajectory(data=np.cumsum(rng_oracle(3).standard_normal((301, 1)), axis=0))
    s = cross_covariances([traj])
    lam = coint_eig(s).values[0]
    x = traj.data[:-1, 0]
    dx = np.diff(traj.data[:, 0])
    direct = (dx @ x) ** 2 / ((x @ x) * (dx @ dx))
    assert abs(lam - direct) < 1e-12


def test_coint_eig_orthogonal_series_gives_zero():
    # constructed so that sum of dx * x_lag is exactly zero
    traj = Trajectory(data=np.array([[0.0], [1.0], [1.0]]))
    lam = coint_eig(cross_covariances([traj])).values
    assert np.abs(lam).max() < 1e-15


def test_coint_eig_matches_canonical_correlations():
    traj = random_trajectory(5, t_steps=400, p=4)
    s = cross_covariances([traj])
    vals = coint_eig(s).values
    x = traj.data[:-1]
    dx = np.diff(traj.data, axis=0)
    assert np.allclose(vals, squared_canonical_correlations(dx, x), atol=1e-10)


def test_coint_eig_values_in_unit_interval_and_normalized():
    for seed in range(5):
        traj = random_trajectory(seed, t_steps=60, p=5)
        s = cross_covariances([traj])
        eig = coint_eig(s)
        assert np.all(eig.values >= 0.0) and np.all(eig.values <= 1.0)
        assert np.allclose(eig.vectors.T @ s.s_xx @ eig.vectors, np.eye(5), atol=1e-8)


def test_sample_eigs_near_population_at_large_t():
    params = four_dim_rank_two_params()
    pop = population_eigs(params)
    t_steps = 5000
    vals = []
    root = RngStream(seed=6)
    for i in range(50):
        traj = simulate_vecm(params, t_steps, root.child(i))
        vals.append(coint_eig(cross_covariances([traj])).values)
    mean = np.mean(vals, axis=0)
    assert np.abs(mean[:2] - pop.lambda11).max() < 0.02
    # the non-cointegrating eigenvalues vanish at the 1/T rate
    assert mean[2:].max() < 50.0 / t_steps


def test_coint_eig_degenerate_sample():
    data = np.zeros((10, 2))
    data[:, 0] = np.arange(10.0)
    with pytest.raises(NotPositiveDefinite):
        coint_eig(cross_covariances([Trajectory(data=data)]))


# ----------------------------------------------------------------- estimators


def test_rrr_rank_zero_and_validation():
    s = cross_covariances([random_trajectory(7)])
    assert np.abs(rrr_estimate(s, 0).pi_hat).max() == 0.0
    with pytest.raises(InvalidRank):
        rrr_estimate(s, -1)
    with pytest.raises(InvalidRank):
        rrr_estimate(s, 4)


def test_rrr_full_rank_equals_least_squares():
    s = cross_covariances([random_trajectory(8, t_steps=300, p=4)])
    full = rrr_estimate(s, 4).pi_hat
    ls = ls_estimate(s).pi_hat
    assert np.abs(full - ls).max() < 1e-10 * max(1.0, np.abs(ls).max())


def test_rrr_matches_independent_reference():
    traj = random_trajectory(9, t_steps=250, p=4)
    s = cross_covariances([traj])
    for k in (1, 2, 3):
        ours = rrr_estimate(s, k).pi_hat
        ref = reference_rrr(traj.data, k)
        assert np.abs(ours - ref).max() < 1e-8


def test_rrr_consistency_on_benchmark_model():
    params = four_dim_rank_two_params()
    pi = params.pi
    root = RngStream(seed=10)
    errs = []
    for i in range(200):
        traj = simulate_vecm(params, 5000, root.child(i))
        fit = rrr_estimate(cross_covariances([traj]), 2)
        errs.append(np.linalg.norm(fit.pi_hat - pi))
    assert np.mean(errs) < 0.1


def test_rank_nesting_additivity():
    s = cross_covariances([random_trajectory(11, t_steps=150, p=4)])
    eig = coint_eig(s)
    for k1, k2 in [(0, 2), (1, 3), (2, 4)]:
        gap = rrr_estimate(s, k2).pi_hat - rrr_estimate(s, k1).pi_hat
        cols = eig.vectors[:, k1:k2]
        assert np.abs(gap - s.s_dxx @ cols @ cols.T).max() < 1e-12


def test_similarity_invariance():
    traj = random_trajectory(12, t_steps=300, p=3)
    m = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -1.0], [0.3, 0.0, 1.5]])
    mapped = Trajectory(data=traj.data @ m.T)
    s0 = cross_covariances([traj])
    s1 = cross_covariances([mapped])
    assert np.abs(coint_eig(s0).values - coint_eig(s1).values).max() < 1e-8
    for k in (1, 2, 3):
        a = rrr_estimate(s0, k).pi_hat
        b = rrr_estimate(s1, k).pi_hat
        assert np.abs(m @ a @ np.linalg.inv(m) - b).max() < 1e-8


def test_weighted_reduces_to_hard_ranks_and_ls():
    s = cross_covariances([random_trajectory(13, t_steps=200, p=4)])
    ones = weighted_estimate(s, np.ones(4)).pi_hat
    assert np.abs(ones - ls_estimate(s).pi_hat).max() < 1e-10
    for k in range(5):
        w = np.array([1.0] * k + [0.0] * (4 - k))
        assert np.abs(weighted_estimate(s, w).pi_hat - rrr_estimate(s, k).pi_hat).max() < 1e-14


def test_weighted_equals_mixture_of_fixed_ranks():
    s = cross_covariances([random_trajectory(14, t_steps=200, p=4)])
    fixed = [rrr_estimate(s, k).pi_hat for k in range(5)]
    gen = rng_oracle(15)
    for _ in range(100):
        w = WeightVector(w=np.sort(gen.uniform(size=4))[::-1])
        mixture = sum(
            coeff * fixed[k] for k, coeff in enumerate(w.mixture_coefficients())
        )
        assert np.abs(weighted_estimate(s, w).pi_hat - mixture).max() < 1e-12


def test_weight_vector_validation():
    WeightVector(w=np.array([1.0, 0.5, 0.5, 0.0]))
    with pytest.raises(InvalidWeights):
        WeightVector(w=np.array([0.5, 0.6]))
    with pytest.raises(InvalidWeights):
        WeightVector(w=np.array([1.2, 0.5]))
    with pytest.raises(InvalidWeights):
        WeightVector(w=np.array([0.5, -0.1]))
    with pytest.raises(InvalidWeights):
        WeightVector(w=np.array([np.nan, 0.1]))
    s = cross_covariances([random_trajectory(16)])
    with pytest.raises(DimensionMismatch):
        weighted_estimate(s, np.array([1.0, 0.5]))


def test_mixture_coefficients_sum_to_one():
    w = WeightVector(w=np.array([0.9, 0.4, 0.4, 0.1]))
    coeffs = w.mixture_coefficients()
    assert coeffs.shape == (5,)
    assert abs(coeffs.sum() - 1.0) < 1e-15
    assert np.all(coeffs >= -1e-15)


def test_ls_scalar_slope_and_normal_equations():
    traj = Trajectory(data=np.cumsum(rng_oracle(17).standard_normal((101, 1)), axis=0))
    s = cross_covariances([traj])
    x = traj.data[:-1, 0]
    dx = np.diff(traj.data[:, 0])
    assert abs(ls_estimate(s).pi_hat[0, 0] - (dx @ x) / (x @ x)) < 1e-12

    traj = random_trajectory(18, t_steps=150, p=3)
    s = cross_covariances([traj])
    pi = ls_estimate(s).pi_hat
    x = traj.data[:-1]
    dx = np.diff(traj.data, axis=0)
    resid = dx - x @ pi.T
    assert np.abs(resid.T @ x / len(x)).max() < 1e-10


def test_estimator_json_export():
    s = cross_covariances([random_trajectory(19)])
    doc = rrr_estimate(s, 2).to_json_dict()
    assert doc["rank_spec"] == {"kind": "fixed", "k": 2}
    assert len(doc["pi_hat"]) == 9 and len(doc["eigenvalues"]) == 3
    wdoc = weighted_estimate(s, np.array([1.0, 0.5, 0.0])).to_json_dict()
    assert wdoc["rank_spec"]["w"] == [1.0, 0.5, 0.0]
    assert "eigenvalues" not in ls_estimate(s).to_json_dict() or True


# ------------------------------------------------------------- lag handling


def test_concentrate_lags_passthrough():
    traj = random_trajectory(20, t_steps=100, p=2)
    conc = concentrate_lags([traj], 1)
    assert np.array_equal(conc.r0, np.diff(traj.data, axis=0))
    assert np.array_equal(conc.r1, traj.data[:-1])
    s_direct = cross_covariances([traj])
    s_conc = conc.to_cross_covariances()
    assert np.allclose(s_direct.s_xx, s_conc.s_xx, atol=1e-14)
    assert np.allclose(s_direct.s_dxx, s_conc.s_dxx, atol=1e-14)


def test_concentrated_fit_agrees_when_lags_are_absent():
    params = four_dim_rank_two_params()
    traj = simulate_vecm(params, 3000, RngStream(seed=21))
    pi_d1 = rrr_estimate(cross_covariances([traj]), 2).pi_hat
    pi_d2 = rrr_estimate(concentrate_lags([traj], 2).to_cross_covariances(), 2).pi_hat
    assert np.linalg.norm(pi_d1 - pi_d2) < 0.1
    assert np.linalg.norm(pi_d1 - params.pi) < 0.2


def test_psi_estimate_exact_on_deterministic_var2():
    pi = np.array([[-0.3, 0.1], [0.05, -0.4]])
    psi = np.array([[0.25, -0.1], [0.0, 0.3]])
    y = np.zeros((20, 2))
    y[0] = [1.0, 2.0]
    y[1] = [1.5, 1.7]
    for t in range(2, 20):
        dy = pi @ y[t - 1] + psi @ (y[t - 1] - y[t - 2])
        y[t] = y[t - 1] + dy
    trials = [Trajectory(data=y)]
    psis = psi_estimate(trials, pi, 2)
    assert len(psis) == 1
    assert np.abs(psis[0] - psi).max() < 1e-8
    # the concentrated eigenproblem also reproduces pi exactly: zero residual noise
    fit = rrr_estimate(concentrate_lags(trials, 2).to_cross_covariances(), 2).pi_hat
    assert np.abs(fit - pi).max() < 1e-6


def test_psi_estimate_monte_carlo_recovery():
    psi = 0.2 * np.eye(2)
    params = VecmParams(
        alpha=np.array([[-0.5], [0.0]]),
        beta=np.array([[1.0], [-1.0]]),
        sigma_z=np.eye(2),
        lag_coeffs=(psi,),
    )
    root = RngStream(seed=22)
    fits = []
    for i in range(40):
        traj = simulate_vecm(params, 5000, root.child(i))
        conc = concentrate_lags([traj], 2)
        pi_hat = rrr_estimate(conc.to_cross_covariances(), 1).pi_hat
        fits.append(psi_estimate([traj], pi_hat, 2)[0])
    fits = np.array(fits)
    err = fits.mean(axis=0) - psi
    se = fits.std(axis=0) / np.sqrt(len(fits))
    assert np.all(np.abs(err) < 3 * se + 1e-3)


def test_psi_estimate_trivial_and_errors():
    traj = random_trajectory(23, t_steps=30, p=2)
    assert psi_estimate([traj], np.zeros((2, 2)), 1) == ()
    with pytest.raises(TooShort):
        concentrate_lags([Trajectory(data=random_trajectory(24, t_steps=6, p=2).data)], 3)
    with pytest.raises(InvalidConfig):
        concentrate_lags([traj], 0)


# ------------------------------------------------- limit-distribution invariant


def test_random_walk_eigenvalue_matches_brownian_ratio():
    """T*lambda-hat of a scalar random walk ~ (int W dW)^2 / int W^2 ds."""
    params = VecmParams(alpha=np.zeros((1, 0)), beta=np.zeros((1, 0)), sigma_z=np.eye(1))
    t_steps, n_draws = 2000, 10000
    root = RngStream(seed=25)
    stats = np.empty(n_draws)
    for i in range(n_draws):
        traj = simulate_vecm(params, t_steps, root.child(i), check_assumptions=False)
        stats[i] = t_steps * coint_eig(cross_covariances([traj])).values[0]
    limit = np.empty(n_draws)
    limit_root = RngStream(seed=26)
    for i in range(n_draws):
        f = sample_brownian_functionals(np.eye(1), 0, 400, limit_root.child(i))
        limit[i] = f.j22[0, 0] ** 2 / f.b[0, 0]
    result = scipy.stats.ks_2samp(stats, limit)
    assert result.pvalue > 0.01
