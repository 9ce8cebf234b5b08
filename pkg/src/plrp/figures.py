"""Matplotlib renderings of the report outputs.

Every function writes a PNG next to the delimited files produced by the
CLI; the delimited files stay the primary artifacts.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_LABELS = {
    "gini": "Gini index",
    "entropy": "entropy",
    "rma": "relevance mass accuracy",
    "lipschitz": "local Lipschitz estimate",
    "faithAUC": "flip-curve AUC",
}


def _series_by_method(rows, metric):
    """method -> (p values, medians); p None for p-independent methods."""
    grouped = {}
    for row in rows:
        value = row.get(metric)
        if value is None or value == "":
            continue
        key = (row["method"], row["mode"])
        p = row["pOrMinGain"]
        p = None if (p == "" or p is None or row["mode"] == "gain") else float(p)
        grouped.setdefault(key, {}).setdefault(p, []).append(float(value))
    series = {}
    for (method, mode), per_p in grouped.items():
        label = method if mode != "gain" else f"{method} (gain)"
        pts = sorted((p, float(np.median(vs))) for p, vs in per_p.items() if p is not None)
        flat = [float(np.median(vs)) for p, vs in per_p.items() if p is None]
        series[label] = (pts, flat[0] if flat else None)
    return series


def sweep_figures(rows, out_dir, metrics=("gini", "entropy", "rma", "lipschitz", "faithAUC")):
    """One median-versus-p figure per metric present in the rows."""
    out_dir = str(out_dir)
    written = []
    for metric in metrics:
        series = _series_by_method(rows, metric)
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for label, (pts, flat) in sorted(series.items()):
            if pts:
                ax.plot([p for p, _ in pts], [v for _, v in pts], marker="o", ms=3, label=label)
            if flat is not None:
                ax.axhline(flat, ls="--", lw=1, label=f"{label}" if not pts else None,
                           color=ax.lines[-1].get_color() if pts else None)
        ax.set_xlabel("pruned relevance proportion p")
        ax.set_ylabel(_METRIC_LABELS.get(metric, metric))
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = f"{out_dir}/fig_{metric.lower()}_vs_p.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def flip_figure(rows, out_path):
    """Mean score-versus-fraction curve per method from long-format rows."""
    grouped = {}
    for row in rows:
        key = row["method"]
        grouped.setdefault(key, {}).setdefault(float(row["fraction"]), []).append(
            float(row["score"])
        )
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for method in sorted(grouped):
        pts = sorted((f, float(np.mean(vs))) for f, vs in grouped[method].items())
        ax.plot([f for f, _ in pts], [v for _, v in pts], label=method)
    ax.set_xlabel("fraction of input perturbed")
    ax.set_ylabel("relative winning-class score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def heatmap_figure(relevance, out_path):
    """Signed attribution heatmap: red positive, blue negative."""
    r = np.asarray(relevance, dtype=np.float64)
    if r.ndim == 3:
        r = r.sum(axis=0)
    peak = float(np.max(np.abs(r))) or 1.0
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(r, cmap="bwr", vmin=-peak, vmax=peak)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def logo_figure(relevance, out_path, bases="ACGT"):
    """Per-base relevance bars over sequence positions."""
    r = np.asarray(relevance, dtype=np.float64)
    if r.ndim == 3 and r.shape[0] == 1:
        r = r[0]
    colors = {"A": "tab:green", "C": "tab:blue", "G": "tab:orange", "T": "tab:red"}
    fig, ax = plt.subplots(figsize=(10, 2.5))
    positions = np.arange(r.shape[1])
    pos_bottom = np.zeros(r.shape[1])
    neg_bottom = np.zeros(r.shape[1])
    for b, base in enumerate(bases):
        vals = r[b]
        up = np.clip(vals, 0.0, None)
        down = np.clip(vals, None, 0.0)
        ax.bar(positions, up, bottom=pos_bottom, width=1.0, color=colors[base], label=base)
        ax.bar(positions, down, bottom=neg_bottom, width=1.0, color=colors[base])
        pos_bottom += up
        neg_bottom += down
    ax.set_xlabel("position")
    ax.set_ylabel("relevance")
    ax.legend(fontsize=8, ncol=4)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
