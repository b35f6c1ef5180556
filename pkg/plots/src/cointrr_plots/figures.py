"""Figure builders for the five results.csv shapes the experiment CLI emits.

Every figure is deterministic: series enter in file order, colors come from a
fixed palette indexed by that order, sources map to fixed line styles, and the
Agg backend draws at a fixed dpi. Rendering reads the CSV once and never
writes anywhere except the requested output path, so a job can be re-run
against the same inputs and reproduce the same bytes.

Kinds:

- ``mspe``      — prediction-error curves over the c grid, one line per
                  estimator, ±2 standard-error band (band dropped when the
                  optional moving-average smoothing is on).
- ``weights``   — mean and standard deviation of each estimator's weight
                  entries over the c grid, stacked panels.
- ``density``   — per-matrix-entry small multiples overlaying empirical and
                  sampled limit-law densities.
- ``rank_hist`` — selected-rank frequencies per eigenvalue setting, grouped
                  bars, with the true rank marked when the file also carries
                  bias rows.
- ``bias``      — fixed-rank bias norm against the fitted rank, one curve per
                  eigenvalue setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.lines import Line2D
from scipy.stats import gaussian_kde

from .errors import InvalidJob, ParseError
from .io import cell_float, cell_int, column_index, read_table

KINDS = ("mspe", "density", "rank_hist", "bias", "weights")

# Matplotlib's tab10, spelled out so the palette cannot drift with the style
# machinery.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
_SOURCE_STYLES = (("empirical", "-"), ("asymptotic", "--"))
_INDEX_DASHES = ("-", "--", "-.", ":")

_STYLE_DEFAULTS = {"dpi": 100, "smooth_window": 0}


@dataclass(frozen=True)
class PlotJob:
    """One rendering request: which CSV, which figure kind, where to write.

    ``style`` accepts ``dpi`` (positive int) and ``smooth_window`` (odd-or-even
    moving-average width for the mspe kind; 0 or 1 disables, the default).
    Unknown keys are rejected so typos fail before any drawing happens.
    """

    input_csv: Path
    kind: str
    output: Path
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidJob(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.style) - set(_STYLE_DEFAULTS)
        if unknown:
            raise InvalidJob(f"unknown style options {sorted(unknown)}")
        merged = {**_STYLE_DEFAULTS, **self.style}
        if not isinstance(merged["dpi"], int) or merged["dpi"] <= 0:
            raise InvalidJob(f"dpi must be a positive integer, got {merged['dpi']!r}")
        window = merged["smooth_window"]
        if not isinstance(window, int) or window < 0:
            raise InvalidJob(f"smooth_window must be a nonnegative integer, got {window!r}")
        if window > 1 and self.kind != "mspe":
            raise InvalidJob("smoothing applies to the mspe kind only")
        object.__setattr__(self, "input_csv", Path(self.input_csv))
        object.__setattr__(self, "output", Path(self.output))
        object.__setattr__(self, "style", merged)


def render(job: PlotJob) -> Path:
    """Build the figure for ``job`` and write it to ``job.output``."""
    fig = build_figure(job)
    try:
        job.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(job.output, dpi=job.style["dpi"])
    finally:
        plt.close(fig)
    return job.output


def build_figure(job: PlotJob):
    """Parse the CSV and return the finished matplotlib Figure."""
    header, rows = read_table(job.input_csv)
    builder = {
        "mspe": _fig_mspe,
        "weights": _fig_weights,
        "density": _fig_density,
        "rank_hist": _fig_rank_hist,
        "bias": _fig_bias,
    }[job.kind]
    return builder(header, rows, job.input_csv, job.style)


def _appearance_order(values):
    seen = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _moving_average(y: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with windows shrunk at the edges."""
    half = (window - 1) // 2
    out = np.empty_like(y, dtype=float)
    for i in range(y.size):
        lo, hi = max(0, i - half), min(y.size, i + window - half)
        out[i] = y[lo:hi].mean()
    return out


# ----------------------------------------------------------------------- mspe


def _fig_mspe(header, rows, path, style):
    i_est = column_index(header, "estimator", path)
    i_c = column_index(header, "c", path)
    i_m = column_index(header, "mspe", path)
    i_se = column_index(header, "mc_stderr", path)
    estimators = _appearance_order(row[i_est] for row in rows)
    window = style["smooth_window"]

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for color_i, est in enumerate(estimators):
        pts = sorted(
            (
                cell_float(row, i_c, line_no, header, path),
                cell_float(row, i_m, line_no, header, path),
                cell_float(row, i_se, line_no, header, path),
            )
            for line_no, row in enumerate(rows, start=3)
            if row[i_est] == est
        )
        c = np.array([p[0] for p in pts])
        mspe = np.array([p[1] for p in pts])
        se = np.array([p[2] for p in pts])
        color = PALETTE[color_i % len(PALETTE)]
        if window > 1:
            ax.plot(c, _moving_average(mspe, window), color=color, label=est)
        else:
            ax.plot(c, mspe, color=color, marker="o", markersize=3, label=est)
            ax.fill_between(c, mspe - 2 * se, mspe + 2 * se, color=color, alpha=0.2, lw=0)
    ax.set_xlabel("c")
    ax.set_ylabel("T · MSPE")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


# -------------------------------------------------------------------- weights


def _fig_weights(header, rows, path, style):
    i_est = column_index(header, "estimator", path)
    i_c = column_index(header, "c", path)
    i_p = column_index(header, "p", path)
    p = cell_int(rows[0], i_p, 3, header, path)
    mean_idx = [column_index(header, f"mean_w{i + 1}", path) for i in range(p)]
    sd_idx = [column_index(header, f"sd_w{i + 1}", path) for i in range(p)]
    estimators = _appearance_order(row[i_est] for row in rows)

    fig, (ax_mean, ax_sd) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 6.0))
    for color_i, est in enumerate(estimators):
        sub = [
            (line_no, row)
            for line_no, row in enumerate(rows, start=3)
            if row[i_est] == est
        ]
        order = np.argsort([cell_float(row, i_c, ln, header, path) for ln, row in sub])
        c = np.array([cell_float(sub[k][1], i_c, sub[k][0], header, path) for k in order])
        color = PALETTE[color_i % len(PALETTE)]
        for w in range(p):
            dash = _INDEX_DASHES[w % len(_INDEX_DASHES)]
            mean = np.array(
                [cell_float(sub[k][1], mean_idx[w], sub[k][0], header, path) for k in order]
            )
            sd = np.array(
                [cell_float(sub[k][1], sd_idx[w], sub[k][0], header, path) for k in order]
            )
            ax_mean.plot(c, mean, dash, color=color, label=f"{est} · w{w + 1}")
            ax_sd.plot(c, sd, dash, color=color)
    ax_mean.set_ylabel("mean weight")
    ax_sd.set_ylabel("sd of weight")
    ax_sd.set_xlabel("c")
    for ax in (ax_mean, ax_sd):
        ax.grid(alpha=0.3)
    ax_mean.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return fig


# -------------------------------------------------------------------- density


def _fig_density(header, rows, path, style):
    i_est = column_index(header, "estimator", path)
    i_src = column_index(header, "source", path)
    i_i = column_index(header, "i", path)
    i_j = column_index(header, "j", path)
    i_val = column_index(header, "value", path)

    samples = {}
    n_i = n_j = 0
    for line_no, row in enumerate(rows, start=3):
        i = cell_int(row, i_i, line_no, header, path)
        j = cell_int(row, i_j, line_no, header, path)
        value = cell_float(row, i_val, line_no, header, path)
        samples.setdefault((i, j), {}).setdefault((row[i_est], row[i_src]), []).append(value)
        n_i, n_j = max(n_i, i), max(n_j, j)
    estimators = _appearance_order(row[i_est] for row in rows)

    fig, axes = plt.subplots(
        n_i, n_j, figsize=(2.4 * n_j, 1.9 * n_i), squeeze=False
    )
    for (i, j), entry in sorted(samples.items()):
        ax = axes[i - 1][j - 1]
        for color_i, est in enumerate(estimators):
            color = PALETTE[color_i % len(PALETTE)]
            for source, dash in _SOURCE_STYLES:
                values = entry.get((est, source))
                if values is None:
                    continue
                _density_curve(ax, np.asarray(values), color, dash)
        ax.set_title(f"({i},{j})", fontsize=8)
        ax.tick_params(labelsize=6)
        ax.grid(alpha=0.3)
    handles = [
        Line2D([], [], color=PALETTE[k % len(PALETTE)], label=est)
        for k, est in enumerate(estimators)
    ] + [Line2D([], [], color="0.3", linestyle=dash, label=src) for src, dash in _SOURCE_STYLES]
    fig.legend(handles=handles, loc="lower center", ncol=len(handles), fontsize=8)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    return fig


def _density_curve(ax, values, color, dash):
    spread = values.std()
    if spread < 1e-12 * (1.0 + abs(float(values.mean()))):
        ax.axvline(float(values.mean()), color=color, linestyle=dash, lw=1.0)
        return
    try:
        kde = gaussian_kde(values)
    except np.linalg.LinAlgError:
        ax.axvline(float(values.mean()), color=color, linestyle=dash, lw=1.0)
        return
    lo, hi = values.min(), values.max()
    pad = 0.05 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, 200)
    ax.plot(grid, kde(grid), dash, color=color, lw=1.0)


# ------------------------------------------------------------------ rank_hist


def _fig_rank_hist(header, rows, path, style):
    lams, hist = _rank_bias_rows(header, rows, path, "rank_hist")
    ranks = sorted({k for counts in hist.values() for k in counts})
    true_rank = _true_rank_if_present(header, rows, path)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    width = 0.8 / len(lams)
    for g, lam in enumerate(lams):
        counts = hist[lam]
        total = sum(counts.values())
        if total <= 0:
            raise ParseError(f"{path}: empty histogram for lambda_min={lam:g}")
        offsets = [k + (g - (len(lams) - 1) / 2) * width for k in ranks]
        probs = [counts.get(k, 0) / total for k in ranks]
        ax.bar(
            offsets, probs, width=width,
            color=PALETTE[g % len(PALETTE)], label=f"λ_min = {lam:g}",
        )
    if true_rank is not None:
        ax.axvline(true_rank, color="0.3", linestyle="--", lw=1.0)
    ax.set_xticks(ranks)
    ax.set_xlabel("selected rank")
    ax.set_ylabel("frequency")
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


# ----------------------------------------------------------------------- bias


def _fig_bias(header, rows, path, style):
    lams, curves = _rank_bias_rows(header, rows, path, "bias")

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for g, lam in enumerate(lams):
        ks = sorted(curves[lam])
        ax.plot(
            ks, [curves[lam][k] for k in ks], "o-",
            color=PALETTE[g % len(PALETTE)], label=f"λ_min = {lam:g}",
        )
    ax.set_xlabel("fitted rank k")
    ax.set_ylabel("‖bias‖_F")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _rank_bias_rows(header, rows, path, which):
    """Rows of the rank study file with kind == which, grouped by lambda_min."""
    i_kind = column_index(header, "kind", path)
    i_lam = column_index(header, "lambda_min", path)
    i_k = column_index(header, "k", path)
    i_val = column_index(header, "value", path)
    lams = []
    grouped = {}
    for line_no, row in enumerate(rows, start=3):
        if row[i_kind] != which:
            continue
        lam = cell_float(row, i_lam, line_no, header, path)
        k = cell_int(row, i_k, line_no, header, path)
        value = cell_float(row, i_val, line_no, header, path)
        if lam not in grouped:
            lams.append(lam)
            grouped[lam] = {}
        grouped[lam][k] = value
    if not grouped:
        raise ParseError(f"{path}: no rows with kind={which!r}")
    return lams, grouped


def _true_rank_if_present(header, rows, path):
    i_kind = column_index(header, "kind", path)
    i_k = column_index(header, "k", path)
    ks = [
        cell_int(row, i_k, line_no, header, path)
        for line_no, row in enumerate(rows, start=3)
        if row[i_kind] == "bias"
    ]
    return max(ks) if ks else None
