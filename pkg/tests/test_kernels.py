"""Consistency tests for the compiled kernels against the public numpy routes."""

import subprocess
import sys

import numpy as np
import pytest

from cointrr import _kernels
from cointrr.estimate import coint_eig, cross_covariances, rrr_estimate
from cointrr.matops import gsym_eig
from cointrr.rank import lr_statistics
from cointrr.simulate import RngStream, Trajectory, simulate_vecm

from cases import four_dim_rank_two_params

rng_oracle = np.random.default_rng


def walk_levels(seed, t_steps=150, p=3):
    return np.cumsum(rng_oracle(seed).standard_normal((t_steps + 1, p)), axis=0)


def test_sim_levels_matches_manual_recursion():
    growth = np.array([[0.9, 0.1], [0.0, 1.0]])
    shocks = rng_oracle(0).standard_normal((30, 2))
    out = _kernels.sim_levels(growth, shocks)
    manual = np.zeros((31, 2))
    for t in range(30):
        manual[t + 1] = growth @ manual[t] + shocks[t]
    assert np.allclose(out, manual, atol=1e-14)
    assert np.array_equal(out[0], np.zeros(2))


def test_cross_covs_match_public_route():
    levels = walk_levels(1)
    s_xx, s_dxx, s_dxdx = _kernels.cross_covs(levels, 150)
    s = cross_covariances([Trajectory(data=levels)])
    assert np.abs(s_xx - s.s_xx).max() < 1e-12 * np.abs(s.s_xx).max()
    assert np.abs(s_dxx - s.s_dxx).max() < 1e-12
    assert np.abs(s_dxdx - s.s_dxdx).max() < 1e-12
    # exact symmetry by construction
    assert np.array_equal(s_xx, s_xx.T)
    assert np.array_equal(s_dxdx, s_dxdx.T)


def test_gev_descending_matches_gsym_eig():
    gen = rng_oracle(2)
    for p in (2, 4, 6):
        a = gen.standard_normal((p, p))
        m = a @ a.T + 0.1 * np.eye(p)
        bmat = gen.standard_normal((p, p))
        n = bmat @ bmat.T + np.eye(p)
        vals, vecs, ok = _kernels.gev_descending(m, n, 1e-12)
        assert ok
        ref = gsym_eig(m, n)
        assert np.abs(vals - ref.values).max() < 1e-10 * max(1.0, np.abs(ref.values).max())
        # eigenvectors may differ by sign/basis; compare projector sums
        for k in range(1, p + 1):
            ours = vecs[:, :k] @ vecs[:, :k].T
            assert np.abs(ours - ref.projector_sum(k)).max() < 1e-8
        assert np.abs(vecs.T @ n @ vecs - np.eye(p)).max() < 1e-8


def test_gev_descending_failure_flag():
    _, _, ok = _kernels.gev_descending(np.eye(2), np.zeros((2, 2)), 1e-12)
    assert not ok
    _, _, ok = _kernels.gev_descending(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.eye(2), 1e-12)
    assert not ok


def test_trace_and_max_eig_statistics_formulas():
    vals = np.array([0.5, 0.2, 0.0])
    t_eff = 100
    trace = _kernels.trace_statistics(vals, t_eff)
    expected = -t_eff * np.array(
        [np.log(0.5) + np.log(0.8), np.log(0.8), 0.0]
    )
    assert np.abs(trace - expected).max() < 1e-10
    max_eig = _kernels.max_eig_statistics(vals, t_eff)
    assert np.abs(max_eig - (-t_eff * np.log1p(-vals))).max() < 1e-10
    assert np.all(np.isnan(_kernels.trace_statistics(np.array([1.0, 0.2]), t_eff)))
    assert np.all(np.isnan(_kernels.max_eig_statistics(np.array([1.0, 0.2]), t_eff)))


def test_fit_eigenproblem_matches_public_fit():
    levels = walk_levels(3, t_steps=200, p=4)
    vals, vecs, s_dxx, ok = _kernels.fit_eigenproblem(levels, 200, 1e-12)
    assert ok
    s = cross_covariances([Trajectory(data=levels)])
    eig = coint_eig(s)
    assert np.abs(vals - eig.values).max() < 1e-10
    assert np.abs(s_dxx - s.s_dxx).max() < 1e-12
    for k in (1, 2, 3):
        kernel_pi = s_dxx @ vecs[:, :k] @ vecs[:, :k].T
        assert np.abs(kernel_pi - rrr_estimate(s, k).pi_hat).max() < 1e-9
    # statistics computed from kernel eigenvalues agree with the public route
    kernel_lr = _kernels.trace_statistics(vals, 200)
    public_lr = lr_statistics(eig, 200).values
    assert np.abs(kernel_lr - public_lr).max() < 1e-7


def test_residuals_are_recentred_and_match_manual_fit():
    levels = walk_levels(4, t_steps=120, p=3)
    vals, vecs, s_dxx, ok = _kernels.fit_eigenproblem(levels, 120, 1e-12)
    assert ok
    for k in (0, 1, 2, 3):
        resid, pi_k = _kernels.residuals_rank_k(levels, 120, vecs, s_dxx, k)
        assert np.abs(resid.mean(axis=0)).max() < 1e-12
        manual_pi = s_dxx @ vecs[:, :k] @ vecs[:, :k].T if k else np.zeros((3, 3))
        assert np.abs(pi_k - manual_pi).max() < 1e-12
        dx = np.diff(levels, axis=0)
        manual = dx - levels[:-1] @ pi_k.T
        manual -= manual.mean(axis=0)
        assert np.abs(resid - manual).max() < 1e-10


def test_bootstrap_statistics_deterministic_and_finite():
    params = four_dim_rank_two_params()
    levels = simulate_vecm(params, 150, RngStream(seed=5)).data
    vals, vecs, s_dxx, ok = _kernels.fit_eigenproblem(levels, 150, 1e-12)
    assert ok
    indices = rng_oracle(6).integers(0, 150, size=(4, 25, 150))
    a = _kernels.bootstrap_statistics(levels, 150, vals, vecs, s_dxx, indices, True, 1e-12)
    b = _kernels.bootstrap_statistics(levels, 150, vals, vecs, s_dxx, indices, True, 1e-12)
    assert np.array_equal(a, b)
    assert a.shape == (4, 25)
    assert np.isfinite(a).mean() > 0.9
    assert np.nanmin(a) >= 0


def test_fallback_mode_matches_numba_mode():
    """The pure-numpy path yields the same numbers as the compiled path."""
    assert _kernels.NUMBA_ENABLED  # this process runs the compiled kernels
    levels = walk_levels(7, t_steps=100, p=3)
    vals, vecs, s_dxx, ok = _kernels.fit_eigenproblem(levels, 100, 1e-12)
    assert ok
    indices = rng_oracle(8).integers(0, 100, size=(3, 10, 100))
    stats = _kernels.bootstrap_statistics(levels, 100, vals, vecs, s_dxx, indices, True, 1e-12)
    script = (
        "import numpy as np\n"
        "from cointrr import _kernels\n"
        "assert not _kernels.NUMBA_ENABLED\n"
        "levels = np.cumsum(np.random.default_rng(7).standard_normal((101, 3)), axis=0)\n"
        "vals, vecs, s_dxx, ok = _kernels.fit_eigenproblem(levels, 100, 1e-12)\n"
        "assert ok\n"
        "indices = np.random.default_rng(8).integers(0, 100, size=(3, 10, 100))\n"
        "stats = _kernels.bootstrap_statistics(levels, 100, vals, vecs, s_dxx, indices, True, 1e-12)\n"
        "np.save('fallback_out.npy', np.concatenate([vals, stats.ravel()]))\n"
    )
    import os
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        proc = subprocess.run(
            [sys.executable, "-c", script],
            cwd=tmp,
            env={**os.environ, "COINTRR_DISABLE_NUMBA": "1"},
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        other = np.load(f"{tmp}/fallback_out.npy")
    ours = np.concatenate([vals, stats.ravel()])
    assert np.abs(ours - other).max() < 1e-9
