"""Hot numerical kernels, JIT-compiled with numba when available.

Setting ``COINTRR_DISABLE_NUMBA=1`` in the environment (or running without
numba installed) executes the same functions as plain Python/NumPy — identical
semantics, no compilation. ``benchmarks/bench_kernels.py`` compares the two
paths. Everything here is deterministic given its inputs: all randomness is
generated by callers and passed in as arrays, so replication work can be
distributed across workers without changing results.

Failure convention: kernels never raise on numerical trouble. Degenerate
matrices yield an ``ok`` flag (or NaN statistics) that callers turn into
skips or typed errors, because structured exception handling is unavailable
inside compiled code.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("COINTRR_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

NUMBA_ENABLED = not _DISABLE
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dependency, but stay usable
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # noqa: D103 - decorator passthrough
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def sim_levels(growth, shocks):
    """Levels path y_t = growth·y_{t−1} + shock_t from y_0 = 0.

    ``growth`` is I + Π; ``shocks`` is (T, p), already colored by the noise
    Cholesky factor. Returns the (T+1, p) path including the zero start row.
    """
    t_steps, p = shocks.shape
    out = np.zeros((t_steps + 1, p))
    for t in range(t_steps):
        out[t + 1] = np.dot(growth, out[t]) + shocks[t]
    return out


@njit(cache=True)
def cross_covs(levels, n_fit):
    """Moment matrices from the first ``n_fit`` transitions of a levels path.

    Returns (S_XX, S_ΔXX, S_ΔXΔX), each normalized by ``n_fit``:
    sums over t = 1..n_fit of x_{t−1}x_{t−1}ᵀ, Δx_t x_{t−1}ᵀ, Δx_t Δx_tᵀ.
    """
    p = levels.shape[1]
    s_xx = np.zeros((p, p))
    s_dxx = np.zeros((p, p))
    s_dxdx = np.zeros((p, p))
    for t in range(1, n_fit + 1):
        for i in range(p):
            xi = levels[t - 1, i]
            di = levels[t, i] - levels[t - 1, i]
            for j in range(p):
                xj = levels[t - 1, j]
                dj = levels[t, j] - levels[t - 1, j]
                s_xx[i, j] += xi * xj
                s_dxx[i, j] += di * xj
                s_dxdx[i, j] += di * dj
    inv = 1.0 / n_fit
    return s_xx * inv, s_dxx * inv, s_dxdx * inv


@njit(cache=True)
def gev_descending(m, n, rel_tol):
    """Generalized symmetric eigensolver via the inverse square root of ``n``.

    Returns (values descending, vectors with GᵀNG = I, ok). ``ok`` is False when
    ``n`` is numerically singular or inputs are non-finite; exception-free so it
    can run inside tight bootstrap loops.
    """
    p = m.shape[0]
    vals = np.zeros(p)
    vecs = np.zeros((p, p))
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(n))):
        return vals, vecs, False
    w_n, v_n = np.linalg.eigh(n)
    if w_n[0] <= rel_tol * max(w_n[p - 1], 1e-300):
        return vals, vecs, False
    inv_root = np.zeros((p, p))
    for i in range(p):
        scale = 1.0 / np.sqrt(w_n[i])
        for a in range(p):
            for b in range(p):
                inv_root[a, b] += v_n[a, i] * scale * v_n[b, i]
    white = np.dot(inv_root, np.dot(m, inv_root))
    white = (white + white.T) / 2.0
    w, u = np.linalg.eigh(white)
    g = np.dot(inv_root, u)
    for j in range(p):
        vals[j] = w[p - 1 - j]
        for a in range(p):
            vecs[a, j] = g[a, p - 1 - j]
    return vals, vecs, True


@njit(cache=True)
def trace_statistics(vals, t_eff):
    """Trace statistics lr_k = −T Σ_{i>k} log(1 − λ_i) for k = 0..p−1.

    NaN when any eigenvalue is at or above 1 (degenerate sample).
    """
    p = vals.shape[0]
    out = np.empty(p)
    acc = 0.0
    for i in range(p - 1, -1, -1):
        lam = vals[i]
        if lam >= 1.0:
            for j in range(p):
                out[j] = np.nan
            return out
        if lam < 0.0:
            lam = 0.0
        acc += -np.log1p(-lam)
        out[i] = t_eff * acc
    return out


@njit(cache=True)
def max_eig_statistics(vals, t_eff):
    """Largest-root statistics lr_k = −T log(1 − λ_{k+1}) for k = 0..p−1."""
    p = vals.shape[0]
    out = np.empty(p)
    for i in range(p):
        lam = vals[i]
        if lam >= 1.0:
            for j in range(p):
                out[j] = np.nan
            return out
        if lam < 0.0:
            lam = 0.0
        out[i] = -t_eff * np.log1p(-lam)
    return out


@njit(cache=True)
def fit_eigenproblem(levels, n_fit, rel_tol):
    """Cross-covariances plus the sample eigenproblem for one path.

    Returns (values, vectors, s_dxx, ok).
    """
    p = levels.shape[1]
    s_xx, s_dxx, s_dxdx = cross_covs(levels, n_fit)
    vals = np.zeros(p)
    vecs = np.zeros((p, p))
    w_d, v_d = np.linalg.eigh((s_dxdx + s_dxdx.T) / 2.0)
    if not np.all(np.isfinite(w_d)) or w_d[0] <= rel_tol * max(w_d[p - 1], 1e-300):
        return vals, vecs, s_dxx, False
    inv_dxdx = np.zeros((p, p))
    for i in range(p):
        scale = 1.0 / w_d[i]
        for a in range(p):
            for b in range(p):
                inv_dxdx[a, b] += v_d[a, i] * scale * v_d[b, i]
    m = np.dot(s_dxx.T, np.dot(inv_dxdx, s_dxx))
    m = (m + m.T) / 2.0
    vals, vecs, ok = gev_descending(m, s_xx, rel_tol)
    return vals, vecs, s_dxx, ok


@njit(cache=True)
def residuals_rank_k(levels, n_fit, vecs, s_dxx, k):
    """Recentred residuals of the rank-k fit, ê_t = Δx_t − Π̂_k x_{t−1} − mean."""
    p = levels.shape[1]
    pi_k = np.zeros((p, p))
    if k > 0:
        head = np.ascontiguousarray(vecs[:, :k])
        pi_k = np.dot(s_dxx, np.dot(head, head.T))
    resid = np.empty((n_fit, p))
    for t in range(1, n_fit + 1):
        pred = np.dot(pi_k, levels[t - 1])
        for i in range(p):
            resid[t - 1, i] = levels[t, i] - levels[t - 1, i] - pred[i]
    for i in range(p):
        mean = 0.0
        for t in range(n_fit):
            mean += resid[t, i]
        mean /= n_fit
        for t in range(n_fit):
            resid[t, i] -= mean
    return resid, pi_k


@njit(cache=True)
def bootstrap_statistics(levels, n_fit, vals, vecs, s_dxx, indices, kind_trace, rel_tol):
    """Bootstrap null statistics for every hypothesis H(0)..H(p−1) of one path.

    ``indices`` has shape (p, B, n_fit): row draws (with replacement) into the
    recentred residuals of the fitted rank-k model; each draw regenerates a
    trajectory under that fit and recomputes the rank statistic for k. Returns
    a (p, B) array, NaN where a draw degenerated.
    """
    p = levels.shape[1]
    n_hyp, n_boot, _ = indices.shape
    out = np.full((n_hyp, n_boot), np.nan)
    path = np.zeros((n_fit + 1, p))
    for k in range(n_hyp):
        resid, pi_k = residuals_rank_k(levels, n_fit, vecs, s_dxx, k)
        growth = np.eye(p) + pi_k
        for b in range(n_boot):
            for t in range(n_fit):
                prev = path[t]
                nxt = np.dot(growth, prev)
                row = indices[k, b, t]
                for i in range(p):
                    path[t + 1, i] = nxt[i] + resid[row, i]
            b_vals, _, _, ok = fit_eigenproblem(path, n_fit, rel_tol)
            if not ok:
                continue
            if kind_trace:
                stats = trace_statistics(b_vals, n_fit)
            else:
                stats = max_eig_statistics(b_vals, n_fit)
            out[k, b] = stats[k]
    return out
