"""CSV summaries, learning curves and Hessian-structure heatmaps."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ContractViolation  # noqa: E402
from .optimize import RunTrace  # noqa: E402

SUMMARY_COLUMNS = ("seed", "iteration", "query_value", "best_so_far", "cum_regret")

# deterministic SVG ids and no timestamps, so reruns give identical bytes
plt.rcParams["svg.hashsalt"] = "dssbo"
_SVG_META = {"Date": None, "Creator": None}


def _cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def summary_rows(traces: Sequence[RunTrace]) -> list[list[str]]:
    rows = []
    for tr in traces:
        for i in range(len(tr.iteration)):
            rows.append([str(tr.seed), str(tr.iteration[i]), _cell(tr.values[i]),
                         _cell(tr.best_so_far[i]), _cell(tr.cum_regret[i])])
    return rows


def write_summary(traces: Sequence[RunTrace], path) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows(summary_rows(traces))
    Path(path).write_text(buf.getvalue())
    return Path(path)


def mean_se(traces: Sequence[RunTrace], attr: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-iteration mean and standard error across seeds (SE is 0 for one seed)."""
    n = max(len(getattr(t, attr)) for t in traces)
    M = np.full((len(traces), n), np.nan)
    for k, t in enumerate(traces):
        v = np.asarray(getattr(t, attr), dtype=float)
        M[k, :len(v)] = v
    its = np.arange(1, n + 1)
    count = np.sum(~np.isnan(M), axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.where(count > 0, np.nansum(M, axis=0) / np.maximum(count, 1), np.nan)
        dev = np.where(np.isnan(M), 0.0, M - mean) ** 2
        var = np.where(count > 1, dev.sum(axis=0) / np.maximum(count - 1, 1), 0.0)
    se = np.sqrt(var) / np.sqrt(np.maximum(count, 1))
    return its, mean, se


def plot_curve(traces: Sequence[RunTrace], path, attr: str = "best_so_far", ylabel: str = "best so far") -> Path:
    its, mean, se = mean_se(traces, attr)
    fig, ax = plt.subplots(figsize=(6, 4))
    ok = ~np.isnan(mean)
    ax.plot(its[ok], mean[ok], color="tab:blue", lw=1.5, label=f"mean of {len(traces)} seed(s)")
    ax.fill_between(its[ok], (mean - se)[ok], (mean + se)[ok], color="tab:blue", alpha=0.25, lw=0,
                    label="± standard error")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return Path(path)


def plot_heatmap(trace: RunTrace, path) -> Path:
    """|summed Hessian| on a linear grayscale, detected edges outlined in red."""
    if trace.hessian_sums is None:
        raise ContractViolation("trace carries no Hessian sums")
    A = np.abs(trace.hessian_sums)
    D = A.shape[0]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(A, cmap="gray_r", vmin=0.0, vmax=float(A.max()) if A.max() > 0 else 1.0,
              interpolation="nearest")
    lw = max(0.2, 1.5 * min(1.0, 20.0 / D))
    for a, b in (trace.graph.edge_list() if trace.graph is not None else []):
        for (r, c) in ((a, b), (b, a)):
            rect = Rectangle((c - 0.5, r - 0.5), 1, 1, fill=False, edgecolor="red", lw=lw)
            rect.set_gid(f"edge-{r}-{c}")
            ax.add_patch(rect)
    ax.set_title(f"|sum of Hessian queries|, {len(trace.graph) if trace.graph else 0} edges", fontsize=9)
    ax.set_xlabel("dimension")
    ax.set_ylabel("dimension")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return Path(path)


def render_outputs(traces: Sequence[RunTrace], out_dir) -> list[Path]:
    """summary.csv, curve.svg, regret.svg (when regret is known) and one
    structure heatmap per seed that ran a structure phase."""
    if not traces:
        raise ContractViolation("no traces to render")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_summary(traces, out / "summary.csv")]
    usable = [t for t in traces if t.iteration]
    if usable:
        files.append(plot_curve(usable, out / "curve.svg"))
        if any(not math.isnan(v) for t in usable for v in t.cum_regret):
            files.append(plot_curve(usable, out / "regret.svg", "cum_regret", "cumulative regret"))
    for t in traces:
        if t.hessian_sums is not None:
            files.append(plot_heatmap(t, out / f"seed_{t.seed}" / "structure.svg"))
    return files
