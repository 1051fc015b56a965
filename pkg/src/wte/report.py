"""Correlation reports, delimited output, and figure rendering.

The report path always writes CSV (the machine-readable contract) and, by
default, renders matplotlib figures next to it for quick visual inspection.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import ValidationError

# distances this small relative to the embedding scale are treated as noise
_DEGENERATE_REL = 1e-9


@dataclass
class CorrelationReport:
    """Per-pair squared embedded distances vs. direct dataset distances."""

    pairs: list  # (id_i, id_j, squared_wte, otdd)
    pearson_r: float
    p_value: float
    slope: float
    intercept: float
    degenerate: bool
    wte_solves: int
    otdd_solves: int


def pearson_with_pvalue(x: np.ndarray, y: np.ndarray):
    """Pearson r with the two-sided p-value of its exact t statistic."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 3:
        raise ValidationError("correlation needs at least 3 pairs")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        return float("nan"), float("nan")
    r = float(np.clip((xc * yc).sum() / (sx * sy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(sps.t.sf(abs(t), n - 2))
    return r, p


def build_correlation_report(
    ids,
    wte_sq_matrix: np.ndarray,
    otdd_matrix: np.ndarray,
    wte_solves: int,
    otdd_solves: int,
    embedding_scale: float,
) -> CorrelationReport:
    """Assemble the per-pair table and fit statistics.

    `embedding_scale` is the mean squared embedding norm; when every pairwise
    distance is negligible against it the correlation is flagged degenerate
    instead of fitted.
    """
    k = len(ids)
    pairs = []
    xs, ys = [], []
    for i in range(k):
        for j in range(i + 1, k):
            pairs.append((ids[i], ids[j], float(wte_sq_matrix[i, j]), float(otdd_matrix[i, j])))
            xs.append(wte_sq_matrix[i, j])
            ys.append(otdd_matrix[i, j])
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    floor = _DEGENERATE_REL * (1.0 + embedding_scale)
    degenerate = bool(max(xs.max(initial=0.0), ys.max(initial=0.0)) <= floor)
    if not degenerate:
        r, p = pearson_with_pvalue(xs, ys)
        if np.isnan(r):
            degenerate = True
    if degenerate:
        r = p = slope = intercept = float("nan")
    else:
        slope, intercept = (float(c) for c in np.polyfit(xs, ys, 1))
    return CorrelationReport(
        pairs=pairs,
        pearson_r=r,
        p_value=p,
        slope=slope,
        intercept=intercept,
        degenerate=degenerate,
        wte_solves=wte_solves,
        otdd_solves=otdd_solves,
    )


def summary_text(report: CorrelationReport) -> str:
    lines = [f"pairs: {len(report.pairs)}"]
    if report.degenerate:
        lines.append("correlation: DEGENERATE (all pairwise distances are at noise level)")
    else:
        lines.append(f"pearson_r: {report.pearson_r:.6f}")
        lines.append(f"p_value: {report.p_value:.6e}")
        lines.append(f"affine_fit: otdd ~= {report.slope:.6f} * squared_wte + {report.intercept:.6f}")
    lines.append(f"wte_solves: {report.wte_solves}")
    lines.append(f"otdd_solves: {report.otdd_solves}")
    return "\n".join(lines) + "\n"


# -- delimited output ----------------------------------------------------------


def write_matrix_csv(path, ids, matrix: np.ndarray) -> None:
    """K x K matrix with task ids as row and column headers."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("task," + ",".join(ids) + "\n")
        for name, row in zip(ids, np.asarray(matrix)):
            fh.write(name + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")[1:]
        rows = []
        for line in fh:
            cells = line.strip().split(",")
            rows.append([float(v) for v in cells[1:]])
    return header, np.asarray(rows)


def write_pairs_csv(path, report: CorrelationReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("task_i,task_j,squared_wte,otdd\n")
        for a, b, w, o in report.pairs:
            fh.write(f"{a},{b},{w:.17g},{o:.17g}\n")


def write_timings_csv(path, results) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("task_i,task_j,n_i,n_j,value,solve_seconds\n")
        for res in results:
            fh.write(
                f"{res.pair[0]},{res.pair[1]},{res.n_i},{res.n_j},"
                f"{res.value:.17g},{res.solve_time:.6f}\n"
            )


def write_bench_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n_tasks,task_size,wte_seconds,otdd_seconds,wte_solves,otdd_solves,ratio\n")
        for r in rows:
            fh.write(
                f"{r['n_tasks']},{r['task_size']},{r['wte_seconds']:.6f},{r['otdd_seconds']:.6f},"
                f"{r['wte_solves']},{r['otdd_solves']},{r['ratio']:.6f}\n"
            )


# -- figures -------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_correlation_figure(path, ids, wte_sq_matrix, otdd_matrix, report: CorrelationReport) -> None:
    """Heatmaps of both distance matrices plus the pairwise scatter with fit."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(13.5, 4.2))
    for ax, matrix, title in (
        (axes[0], otdd_matrix, "direct dataset distance"),
        (axes[1], wte_sq_matrix, "squared embedded distance"),
    ):
        im = ax.imshow(matrix, cmap="viridis")
        ax.set_title(title)
        ax.set_xticks(range(len(ids)))
        ax.set_yticks(range(len(ids)))
        ax.set_xticklabels(ids, rotation=90, fontsize=7)
        ax.set_yticklabels(ids, fontsize=7)
        fig.colorbar(im, ax=ax, fraction=0.046)
    xs = np.array([p[2] for p in report.pairs])
    ys = np.array([p[3] for p in report.pairs])
    ax = axes[2]
    ax.scatter(xs, ys, s=18, alpha=0.8)
    if not report.degenerate:
        grid = np.linspace(xs.min(), xs.max(), 32)
        ax.plot(grid, report.slope * grid + report.intercept, "r--", linewidth=1)
        ax.set_title(f"r = {report.pearson_r:.3f}, p = {report.p_value:.2e}")
    else:
        ax.set_title("degenerate (distances at noise level)")
    ax.set_xlabel("squared embedded distance")
    ax.set_ylabel("direct dataset distance")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench_figure(path, rows) -> None:
    """Wall-clock comparison and its ratio as the task count grows."""
    plt = _pyplot()
    ms = [r["n_tasks"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    ax1.plot(ms, [r["otdd_seconds"] for r in rows], "o-", label="pairwise direct")
    ax1.plot(ms, [r["wte_seconds"] for r in rows], "s-", label="embedding")
    ax1.set_xlabel("number of tasks")
    ax1.set_ylabel("wall-clock seconds")
    ax1.legend()
    ax2.plot(ms, [r["ratio"] for r in rows], "d-")
    ax2.set_xlabel("number of tasks")
    ax2.set_ylabel("time ratio (direct / embedding)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
