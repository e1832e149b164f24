"""Post-hoc statistics over search results: log-log power-law fits,
Pearson correlations, efficiency ratios, cross-node comparisons, and their
CSV emission.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

METRICS = ("power_mw", "perf_gops", "area_mm2", "ppa_score", "tok_s")


@dataclass(frozen=True)
class PowerLawFit:
    k: float          # exponent
    c: float          # prefactor, y = c * x^k
    r2: float         # coefficient of determination in log space
    degenerate: bool  # True when y had zero variance (R2 reported as 1)


def powerlaw_fit(x: list[float], y: list[float]) -> PowerLawFit:
    """OLS fit of log y = log c + k log x."""
    if len(x) != len(y) or len(x) < 3:
        raise ValueError("need at least 3 paired points")
    if min(x) <= 0 or min(y) <= 0:
        raise ValueError("power-law fit requires positive data")
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        return PowerLawFit(k=0.0, c=float(np.exp(ly[0])), r2=1.0, degenerate=True)
    k, logc = np.polyfit(lx, ly, 1)
    resid = ly - (logc + k * lx)
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return PowerLawFit(k=float(k), c=float(np.exp(logc)), r2=r2, degenerate=False)


def pearson_matrix(table: np.ndarray) -> np.ndarray:
    """Pearson correlations between columns; constant columns correlate 0
    with everything and 1 with themselves."""
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[0] < 2:
        raise ValueError("need a 2-D table with at least 2 rows")
    centered = t - t.mean(axis=0)
    std = centered.std(axis=0)
    m = t.shape[1]
    out = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            if std[i] == 0 or std[j] == 0:
                r = 0.0
            else:
                r = float(np.mean(centered[:, i] * centered[:, j])
                          / (std[i] * std[j]))
            out[i, j] = out[j, i] = max(-1.0, min(1.0, r))
    return out


def efficiency(perf_gops: float, power_mw: float, area_mm2: float,
               tok_s: float) -> dict:
    """Derived ratios; zero denominators are an error, never infinity."""
    if power_mw <= 0:
        raise ValueError("power must be > 0")
    if area_mm2 <= 0:
        raise ValueError("area must be > 0")
    return {
        "gops_per_mw": perf_gops / power_mw,
        "tok_s_per_mw": tok_s / power_mw,
        "gops_per_mm2": perf_gops / area_mm2,
    }


def cross_node_report(rows: list[dict]) -> dict:
    """Best-vs-worst ratios across the per-node result rows (keyed by the
    standard metric names)."""
    if not rows:
        raise ValueError("no rows")
    by_perf = sorted(rows, key=lambda r: r["perf_gops"])
    by_area = sorted(rows, key=lambda r: r["area_mm2"])
    by_power = sorted(rows, key=lambda r: r["power_mw"])
    best, worst = by_perf[-1], by_perf[0]
    return {
        "best_node": best["process_node"],
        "worst_node": worst["process_node"],
        "perf_ratio": best["perf_gops"] / worst["perf_gops"],
        "area_ratio": by_area[-1]["area_mm2"] / by_area[0]["area_mm2"],
        "power_ratio": by_power[-1]["power_mw"] / by_power[0]["power_mw"],
    }


# --- CSV emission ----------------------------------------------------------------

def read_ppa_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = dict(row)
            for k in ("process_node", "cores"):
                parsed[k] = int(row[k])
            for k in ("freq_mhz", *METRICS):
                parsed[k] = float(row[k])
            rows.append(parsed)
    return rows


def write_statistical_analysis(path: str | Path, rows: list[dict]) -> None:
    """Power-law fits of each metric vs feature size, one CSV row each."""
    x = [float(r["process_node"]) for r in rows]
    header = ["metric", "exponent_k", "prefactor_c", "r_squared", "degenerate"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for metric in METRICS:
            y = [r[metric] for r in rows]
            if min(y) <= 0:
                continue
            fit = powerlaw_fit(x, y)
            w.writerow({"metric": metric, "exponent_k": f"{fit.k:.6g}",
                        "prefactor_c": f"{fit.c:.6g}",
                        "r_squared": f"{fit.r2:.6g}",
                        "degenerate": int(fit.degenerate)})


def write_correlation_matrix(path: str | Path, rows: list[dict]) -> None:
    table = np.array([[r[m] for m in METRICS] for r in rows])
    mat = pearson_matrix(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", *METRICS])
        for name, row in zip(METRICS, mat):
            w.writerow([name, *[f"{v:.6g}" for v in row]])


def write_efficiency_metrics(path: str | Path, rows: list[dict]) -> None:
    header = ["process_node", "gops_per_mw", "tok_s_per_mw", "gops_per_mm2"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for r in rows:
            eff = efficiency(r["perf_gops"], r["power_mw"], r["area_mm2"],
                             r["tok_s"])
            w.writerow({"process_node": r["process_node"],
                        **{k: f"{v:.6g}" for k, v in eff.items()}})


def write_baseline_comparison(path: str | Path, report: dict) -> None:
    header = ["best_node", "worst_node", "perf_ratio", "area_ratio", "power_ratio"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v)
                    for k, v in report.items()})
