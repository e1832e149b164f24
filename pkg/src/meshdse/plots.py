"""Figure rendering for the analysis report: per-node PPA trends, mesh
scaling, training curves, and the per-tile WMEM Lorenz curve.  All figures
are written to files (Agg backend, no display required).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_ppa_by_node(rows: list[dict], path: str | Path) -> None:
    """Log-log power, performance, and area versus feature size."""
    nodes = [r["process_node"] for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    for ax, metric, label in zip(
            axes, ("power_mw", "perf_gops", "area_mm2"),
            ("Power (mW)", "Performance (GOps/s)", "Area (mm$^2$)")):
        ax.loglog(nodes, [r[metric] for r in rows], "o-")
        ax.set_xlabel("feature size (nm)")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_mesh_scaling(rows: list[dict], path: str | Path) -> None:
    nodes = [int(r["process_node"]) for r in rows]
    cores = [int(r["cores"]) for r in rows]
    tok_s = [float(r["tok_s"]) for r in rows]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(nodes, cores, "s-", color="tab:blue", label="cores")
    ax1.set_xlabel("feature size (nm)")
    ax1.set_ylabel("mesh cores", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.semilogy(nodes, tok_s, "o--", color="tab:red", label="tokens/s")
    ax2.set_ylabel("tokens/s", color="tab:red")
    ax1.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_training_curve(log_path: str | Path, path: str | Path) -> None:
    episodes, rewards, scores = [], [], []
    with open(log_path, newline="") as fh:
        for row in csv.DictReader(fh):
            episodes.append(int(row["episode"]))
            rewards.append(float(row["reward"]))
            s = row["ppa_score"]
            scores.append(float("nan") if s == "inf" else float(s))
    best, cur = [], float("inf")
    for s in scores:
        if s == s:  # skip NaN
            cur = min(cur, s)
        best.append(cur if cur != float("inf") else float("nan"))
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(episodes, rewards, alpha=0.4, label="reward")
    ax1.set_xlabel("episode")
    ax1.set_ylabel("reward")
    ax2 = ax1.twinx()
    ax2.plot(episodes, best, color="tab:red", label="best score")
    ax2.set_ylabel("best composite score")
    ax1.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_lorenz(values: list[float], path: str | Path, label: str = "WMEM") -> None:
    """Lorenz curve of a per-tile allocation; the diagonal is perfect equality."""
    xs = sorted(values)
    total = sum(xs) or 1.0
    cum = [0.0]
    for v in xs:
        cum.append(cum[-1] + v / total)
    frac = [i / len(xs) for i in range(len(xs) + 1)]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(frac, cum, label=f"{label} Lorenz")
    ax.plot([0, 1], [0, 1], "k--", alpha=0.5, label="equality")
    ax.set_xlabel("tile fraction")
    ax.set_ylabel(f"cumulative {label} fraction")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
