"""Tests for rank statistics, selection, bootstrap calibration and weights."""

import numpy as np
import pytest
from scipy.special import erf

from cointrr.errors import (
    BootstrapFailed,
    DimensionMismatch,
    EigenvalueOutOfRange,
    InvalidConfig,
)
from cointrr.estimate import coint_eig, cross_covariances, rrr_estimate, weighted_estimate
from cointrr.matops import GenEig
from cointrr.model import VecmParams
from cointrr.rank import (
    CriticalValues,
    LrSequence,
    bootstrap_critical_values,
    lr_statistics,
    select_rank,
    weights_exp,
    weights_hard,
    weights_sigmoid,
)
from cointrr.simulate import RngStream, Trajectory, simulate_vecm

from cases import spread_eigs_params

rng_oracle = np.random.default_rng


def eig_of(values):
    values = np.asarray(values, dtype=float)
    return GenEig(values=values, vectors=np.eye(values.size))


def user_critical(values):
    return CriticalValues(values=np.asarray(values, dtype=float), source={"kind": "user"})


def random_lr(seed, p=4, t_eff=100):
    vals = np.sort(rng_oracle(seed).uniform(0, 0.9, size=p))[::-1]
    return lr_statistics(eig_of(vals), t_eff)


# ------------------------------------------------------------- lr statistics


def test_lr_zero_eigenvalues():
    lr = lr_statistics(eig_of([0.0, 0.0]), 50)
    assert np.array_equal(lr.values, np.zeros(2))


def test_lr_trace_formula():
    lr = lr_statistics(eig_of([0.5, 0.1]), 100)
    assert abs(lr.values[0] - (-100 * (np.log(0.5) + np.log(0.9)))) < 1e-10
    assert abs(lr.values[1] - (-100 * np.log(0.9))) < 1e-10


def test_lr_max_eig_formula():
    lr = lr_statistics(eig_of([0.5, 0.1]), 100, kind="max_eig")
    assert abs(lr.values[0] - (-100 * np.log(0.5))) < 1e-10
    assert abs(lr.values[1] - (-100 * np.log(0.9))) < 1e-10


def test_lr_trace_nonincreasing():
    for seed in range(20):
        lr = random_lr(seed)
        assert np.all(np.diff(lr.values) <= 1e-12)


def test_lr_rejects_unit_eigenvalue():
    with pytest.raises(EigenvalueOutOfRange):
        lr_statistics(eig_of([1.0, 0.2]), 10)
    with pytest.raises(InvalidConfig):
        lr_statistics(eig_of([0.5]), 10, kind="bogus")


def test_lr_json_roundtrip():
    lr = random_lr(3)
    back = LrSequence.from_json_dict(lr.to_json_dict())
    assert back.kind == lr.kind and back.t_effective == lr.t_effective
    assert np.array_equal(back.values, lr.values)


# ---------------------------------------------------------------- selection


def test_select_rank_cases():
    c = user_critical([1.0, 1.0, 1.0])
    assert select_rank(LrSequence("trace", np.zeros(3), 10), c) == 0
    assert select_rank(LrSequence("trace", np.array([9e9, 8e9, 7e9]), 10), c) == 3
    lr = LrSequence("trace", np.array([10.0, 5.0, 1.0]), 10)
    assert select_rank(lr, user_critical([6.0, 6.0, 6.0])) == 1
    with pytest.raises(DimensionMismatch):
        select_rank(lr, user_critical([1.0, 1.0]))


def test_select_rank_monotone_in_critical_values():
    for seed in range(25):
        lr = random_lr(seed)
        gen = rng_oracle(100 + seed)
        c = gen.uniform(0, 120, size=4)
        base = select_rank(lr, user_critical(c))
        bumped = c.copy()
        bumped[gen.integers(0, 4)] += gen.uniform(0, 50)
        assert select_rank(lr, user_critical(bumped)) <= base


# ------------------------------------------------------------------- weights


def test_weights_hard_cases():
    c = user_critical([5.0, 5.0, 5.0])
    huge = LrSequence("trace", np.array([100.0, 90.0, 80.0]), 10)
    assert np.array_equal(weights_hard(huge, c).w, np.ones(3))
    zero = LrSequence("trace", np.zeros(3), 10)
    assert np.array_equal(weights_hard(zero, c).w, np.zeros(3))
    for seed in range(20):
        lr = random_lr(seed)
        c = user_critical(rng_oracle(200 + seed).uniform(0, 120, size=4))
        r_hat = select_rank(lr, c)
        assert np.array_equal(weights_hard(lr, c).w, (np.arange(4) < r_hat).astype(float))


def test_weights_hard_equals_post_selection_estimator():
    data = np.cumsum(rng_oracle(7).standard_normal((301, 4)), axis=0)
    s = cross_covariances([Trajectory(data=data)])
    lr = lr_statistics(coint_eig(s), s.t_effective)
    c = user_critical([40.0, 20.0, 10.0, 5.0])
    r_hat = select_rank(lr, c)
    hard = weighted_estimate(s, weights_hard(lr, c)).pi_hat
    assert np.abs(hard - rrr_estimate(s, r_hat).pi_hat).max() < 1e-14


def test_weights_exp_values_and_monotonicity():
    lr = LrSequence("trace", np.array([10.0, 2.0]), 100)
    w = weights_exp(lr, 1.0, 0.5)
    # a1 T^{-a2} lr_0 = 10/sqrt(100) = 1
    assert abs(w.w[0] - (1 - np.exp(-1))) < 1e-12
    zero = LrSequence("trace", np.zeros(2), 100)
    assert np.array_equal(weights_exp(zero, 1.0, 0.5).w, np.zeros(2))
    big = LrSequence("trace", np.array([30.0, 28.0]), 100)
    assert np.all(weights_exp(big, 1.0, 0.0).w > 1 - 1e-12)
    assert np.all(weights_exp(big, 1.0, 0.0).w < 1.0)
    # monotone in lr entries and in a1
    w_lo = weights_exp(lr, 0.5, 0.5).w
    w_hi = weights_exp(lr, 2.0, 0.5).w
    assert np.all(w_hi >= w_lo)
    lr_hi = LrSequence("trace", np.array([12.0, 2.5]), 100)
    assert np.all(weights_exp(lr_hi, 1.0, 0.5).w >= w.w)


def test_weights_exp_validation():
    lr = LrSequence("trace", np.array([1.0]), 10)
    with pytest.raises(InvalidConfig):
        weights_exp(lr, 0.0, 0.5)
    with pytest.raises(InvalidConfig):
        weights_exp(lr, 1.0, -0.1)
    max_lr = LrSequence("max_eig", np.array([1.0]), 10)
    with pytest.raises(InvalidConfig):
        weights_exp(max_lr, 1.0, 0.5)


def test_weights_sigmoid_values():
    lr = LrSequence("trace", np.array([5.0, 3.0]), 10)
    w = weights_sigmoid(lr, user_critical([5.0, 3.0]), 1.0)
    assert np.abs(w.w - 0.5).max() < 1e-12
    w = weights_sigmoid(LrSequence("trace", np.array([1e8, 13.0]), 10), user_critical([1.0, 3.0]), 0.1)
    assert abs(w.w[0] - 1.0) < 1e-12
    assert abs(w.w[1] - (erf(1.0) + 1) / 2) < 1e-12
    with pytest.raises(InvalidConfig):
        weights_sigmoid(lr, user_critical([1.0, 1.0]), 0.0)


def test_weights_sigmoid_clamps_non_monotone_input():
    lr = LrSequence("trace", np.array([10.0, 8.0, 6.0]), 10)
    c = user_critical([9.0, 2.0, 10.0])  # non-monotone user thresholds
    w = weights_sigmoid(lr, c, 1.0)
    assert np.all(np.diff(w.w) <= 0)
    raw = (erf(1.0 * (lr.values - c.values)) + 1) / 2
    assert np.any(np.diff(raw) > 0)  # clamping actually did something
    assert w.w[0] == raw[0]


def test_critical_values_roundtrip(tmp_path):
    c = CriticalValues(values=np.array([3.0, 1.5]), source={"kind": "user"})
    path = tmp_path / "c.json"
    c.save(path)
    back = CriticalValues.load(path)
    assert np.array_equal(back.values, c.values)
    assert back.source == {"kind": "user"}
    with pytest.raises(InvalidConfig):
        CriticalValues(values=np.array([-1.0]), source={"kind": "user"})


# ----------------------------------------------------------------- bootstrap


def test_bootstrap_deterministic():
    data = np.cumsum(rng_oracle(11).standard_normal((121, 2)), axis=0)
    traj = Trajectory(data=data)
    a = bootstrap_critical_values(traj, b=49, rng=RngStream(seed=1))
    b = bootstrap_critical_values(traj, b=49, rng=RngStream(seed=1))
    assert np.array_equal(a.values, b.values)
    assert a.source["kind"] == "bootstrap" and a.source["b"] == 49
    c = bootstrap_critical_values(traj, b=49, rng=RngStream(seed=2))
    assert not np.array_equal(a.values, c.values)


def test_bootstrap_validation():
    traj = Trajectory(data=np.cumsum(rng_oracle(12).standard_normal((61, 2)), axis=0))
    with pytest.raises(InvalidConfig):
        bootstrap_critical_values(traj, b=0, rng=RngStream(seed=0))
    with pytest.raises(InvalidConfig):
        bootstrap_critical_values(traj, alpha=1.5, rng=RngStream(seed=0))
    with pytest.raises(InvalidConfig):
        bootstrap_critical_values(traj, kind="bogus", rng=RngStream(seed=0))
    with pytest.raises(InvalidConfig):
        bootstrap_critical_values(traj, b=10)


def test_bootstrap_failure_guard(monkeypatch):
    import cointrr.rank as rank_mod

    def all_nan(levels, n_fit, vals, vecs, s_dxx, indices, kind_trace, tol):
        return np.full((indices.shape[0], indices.shape[1]), np.nan)

    monkeypatch.setattr(rank_mod, "bootstrap_statistics", all_nan)
    traj = Trajectory(data=np.cumsum(rng_oracle(13).standard_normal((61, 2)), axis=0))
    with pytest.raises(BootstrapFailed):
        bootstrap_critical_values(traj, b=20, rng=RngStream(seed=0))


def test_bootstrap_pooled_trials_route():
    gen = rng_oracle(14)
    trials = [
        Trajectory(data=np.cumsum(gen.standard_normal((81, 2)), axis=0)) for _ in range(2)
    ]
    a = bootstrap_critical_values(trials, b=19, rng=RngStream(seed=3))
    b = bootstrap_critical_values(trials, b=19, rng=RngStream(seed=3))
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (2,) and np.all(a.values > 0)


def test_bootstrap_size_calibration():
    """Under the null (scalar random walk), H(0) rejects at close to alpha."""
    params = VecmParams(alpha=np.zeros((1, 0)), beta=np.zeros((1, 0)), sigma_z=np.eye(1))
    root = RngStream(seed=17)
    n_outer, t_steps = 200, 200
    rejections = 0
    for i in range(n_outer):
        traj = simulate_vecm(params, t_steps, root.child(i).child(0), check_assumptions=False)
        lr = lr_statistics(coint_eig(cross_covariances([traj])), t_steps)
        c = bootstrap_critical_values(traj, b=299, alpha=0.05, rng=root.child(i).child(1))
        if lr.values[0] > c.values[0]:
            rejections += 1
    rate = rejections / n_outer
    assert 0.02 <= rate <= 0.10


def test_bootstrap_rank_detection_shifts_with_signal_strength():
    """Weak cointegration leads to underestimated rank; strong is recovered."""
    t_steps, n_reps = 200, 25
    means = []
    for js, lam_min in enumerate([0.01, 0.35]):
        params = spread_eigs_params(lam_min, p=4, r=2)
        root = RngStream(seed=40 + js)
        r_hats = []
        for i in range(n_reps):
            traj = simulate_vecm(params, t_steps, root.child(i).child(0))
            lr = lr_statistics(coint_eig(cross_covariances([traj])), t_steps)
            c = bootstrap_critical_values(traj, b=99, alpha=0.05, rng=root.child(i).child(1))
            r_hats.append(select_rank(lr, c))
        means.append(np.mean(r_hats))
    assert means[0] < means[1]
    assert means[1] > 1.5  # strong signal mostly finds rank 2
