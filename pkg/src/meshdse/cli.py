"""Command-line entry point: workload generation, design-space exploration,
search baselines, post-hoc analysis with rendered figures, and the state /
action index tables.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
import sys
from pathlib import Path

import click

from .analysis import (cross_node_report, read_ppa_csv,
                       write_baseline_comparison, write_correlation_matrix,
                       write_efficiency_metrics, write_statistical_analysis)
from .graph import Precision, gen_transformer, load_graph, save_graph
from .partition import derive_heterogeneous, place, region_stats, tiles_to_json
from .procnode import NODE_NMS, node_by_nm
from .rlenv import ACTION_FIELDS, Constraints, EpisodeContext, STATE_FIELDS, SUBSET_IDX
from .sac import SacConfig
from .search import (NodeResult, derive_constraints, evaluate, grid_search,
                     random_search, run_node, write_mesh_scaling,
                     write_ppa_by_node, write_search_comparison,
                     write_training_log, write_training_stats)

MODE_WEIGHTS = {"hp": (0.4, 0.4, 0.2), "lp": (0.2, 0.6, 0.2)}

PRESETS = {
    # name: (layers, hidden, heads, kv_heads, vocab, seq_len, intermediate)
    "llama8b-toy": (4, 256, 8, 2, 2048, 512, None),
    "llama8b": (32, 4096, 32, 8, 128256, 2048, 14336),
    "tiny": (2, 64, 4, 2, 256, 128, None),
}


@click.group()
def main():
    """Design-space exploration for 2D-mesh AI accelerators."""


@main.command("gen-workload")
@click.option("--layers", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--heads", type=int, default=None)
@click.option("--kv-heads", type=int, default=None)
@click.option("--vocab", type=int, default=None)
@click.option("--seq-len", type=int, default=None)
@click.option("--intermediate", type=int, default=None)
@click.option("--precision", type=click.Choice([p.value for p in Precision]),
              default="FP16")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_workload(layers, hidden, heads, kv_heads, vocab, seq_len, intermediate,
                 precision, preset, out):
    """Generate a synthetic transformer operator graph as JSON."""
    if preset:
        p_layers, p_hidden, p_heads, p_kv, p_vocab, p_seq, p_inter = PRESETS[preset]
        layers = layers or p_layers
        hidden = hidden or p_hidden
        heads = heads or p_heads
        kv_heads = kv_heads or p_kv
        vocab = vocab or p_vocab
        seq_len = seq_len or p_seq
        intermediate = intermediate or p_inter
    missing = [n for n, v in [("--layers", layers), ("--hidden", hidden),
                              ("--heads", heads), ("--kv-heads", kv_heads),
                              ("--vocab", vocab), ("--seq-len", seq_len)]
               if v is None]
    if missing:
        raise click.UsageError(f"missing required flags: {', '.join(missing)} "
                               "(or use --preset)")
    g = gen_transformer(layers, hidden, heads, kv_heads, vocab, seq_len,
                        precision=Precision(precision), intermediate=intermediate)
    save_graph(g, out)
    click.echo(f"wrote {out}: {len(g.nodes)} ops, {g.p_total:,} params, "
               f"{g.w_total / 2**20:.1f} MiB weights")


def _parse_nodes(spec: str) -> list[int]:
    try:
        nms = [int(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"cannot parse node list {spec!r}")
    for nm in nms:
        if nm not in NODE_NMS:
            raise click.BadParameter(
                f"unknown process node {nm} nm; valid nodes: {sorted(NODE_NMS)}")
    return nms


def _run_id(seed: int, blob: dict) -> str:
    digest = hashlib.sha1(json.dumps(blob, sort_keys=True).encode()).hexdigest()
    return f"{seed:04d}-{digest[:8]}"


def _archive_dump(result: NodeResult) -> list[dict]:
    return [{"perf_gops": e.perf, "power_mw": e.power, "area_mm2": e.area,
             "score": e.est.score, "mesh": f"{e.cfg.mesh_w}x{e.cfg.mesh_h}",
             "cores": e.cfg.n_cores}
            for e in sorted(result.archive.entries, key=lambda e: -e.perf)]


@main.command()
@click.option("--workload", type=click.Path(exists=True), required=True)
@click.option("--nodes", default=",".join(str(n) for n in NODE_NMS),
              show_default=True, help="Comma-separated feature sizes in nm.")
@click.option("--budget", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--constraints", "constraints_path", type=click.Path(exists=True),
              default=None, help="JSON constraints file (default: derived).")
@click.option("--mode", type=click.Choice(sorted(MODE_WEIGHTS)), default="hp",
              show_default=True)
@click.option("--warmup", type=int, default=None,
              help="SAC warmup steps (default: min(1000, budget // 5)).")
@click.option("--mpc/--no-mpc", default=True, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="out",
              show_default=True)
@click.pass_context
def explore(ctx, workload, nodes, budget, seed, constraints_path, mode,
            warmup, mpc, out):
    """Run the RL search per node and write the result artifact tree.

    Exits 0 when at least one feasible configuration was found, 1 otherwise.
    """
    g = load_graph(workload)
    node_nms = _parse_nodes(nodes)
    weights = MODE_WEIGHTS[mode]
    if warmup is None:
        warmup = min(1000, max(1, budget // 5))
    if budget < warmup:
        raise click.UsageError(f"budget {budget} < warmup {warmup}")
    sac_cfg = SacConfig(warmup=warmup, eps_horizon=max(1, budget))

    resolved = {
        "workload": str(workload), "nodes": node_nms, "budget": budget,
        "seed": seed, "mode": mode, "weights": list(weights),
        "warmup": warmup, "mpc": mpc,
        "constraints_file": constraints_path,
    }
    run_dir = Path(out) / _run_id(seed, resolved)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    results: dict[int, NodeResult] = {}
    any_feasible = False
    for i, nm in enumerate(node_nms):
        node = node_by_nm(nm)
        if constraints_path:
            cons = Constraints.load(constraints_path)
            cons.weights = weights
        else:
            cons = derive_constraints(g, node, weights=weights)
        result = run_node(node, g, cons, budget, seed + i,
                          sac_cfg=sac_cfg, use_mpc=mpc)
        results[nm] = result
        any_feasible = any_feasible or result.any_feasible

        node_dir = run_dir / f"{nm}nm"
        node_dir.mkdir(exist_ok=True)
        write_training_log(node_dir / "training_log.csv", result.log)
        (node_dir / "archive.json").write_text(
            json.dumps(_archive_dump(result), indent=1) + "\n")
        (node_dir / "constraints.json").write_text(
            json.dumps(cons.to_json(), indent=1, sort_keys=True) + "\n")
        if result.best_cfg is not None:
            pl = place(g, result.best_cfg, ratios=EpisodeContext().rho)
            het = derive_heterogeneous(result.best_cfg, pl, g.w_total)
            (node_dir / "tiles.json").write_text(
                json.dumps(tiles_to_json(het), indent=1) + "\n")
            stats = region_stats(het)
            (node_dir / "allocation_stats.json").write_text(json.dumps({
                "gini_wmem": stats.gini_wmem, "regions": stats.regions,
            }, indent=1) + "\n")
        status = "feasible" if result.any_feasible else "no feasible config"
        click.echo(f"{nm}nm: best score {result.best_score:.4f} "
                   f"({result.feasible_count} feasible evals, {status})")

    write_ppa_by_node(run_dir / "ppa_by_node.csv", results)
    write_mesh_scaling(run_dir / "mesh_scaling.csv", results)
    write_training_stats(run_dir / "training_stats.csv", results)
    click.echo(f"artifacts in {run_dir}")
    if not any_feasible:
        ctx.exit(1)


@main.command()
@click.option("--workload", type=click.Path(exists=True), required=True)
@click.option("--node", "node_nm", type=int, default=3, show_default=True)
@click.option("--strategy", type=click.Choice(["random", "grid", "sac", "all"]),
              default="all", show_default=True)
@click.option("--budget", type=int, default=500, show_default=True)
@click.option("--seeds", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--warmup", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False),
              default="search_comparison.csv", show_default=True)
def baseline(workload, node_nm, strategy, budget, seeds, seed, warmup, out):
    """Compare search strategies at equal evaluation budget."""
    g = load_graph(workload)
    if node_nm not in NODE_NMS:
        raise click.BadParameter(
            f"unknown process node {node_nm} nm; valid nodes: {sorted(NODE_NMS)}")
    node = node_by_nm(node_nm)
    cons = derive_constraints(g, node)
    if warmup is None:
        warmup = min(1000, max(1, budget // 5))
    sac_cfg = SacConfig(warmup=warmup, eps_horizon=max(1, budget))

    strategies = ["random", "grid", "sac"] if strategy == "all" else [strategy]
    rows = []
    for strat in strategies:
        per_seed = []
        for k in range(seeds):
            s = seed + k
            if strat == "random":
                res = random_search(node, g, cons, budget, s)
            elif strat == "grid":
                res = grid_search(node, g, cons, budget)
            else:
                res = run_node(node, g, cons, budget, s, sac_cfg=sac_cfg)
            row = {"strategy": strat, "seed": s, "best_score": res.best_score,
                   "feasible_count": res.feasible_count,
                   "best_tok_s": res.best_est.tok_s if res.best_est else 0.0}
            rows.append(row)
            per_seed.append(row)
            if strat == "grid":
                break  # deterministic, one run suffices
        rows.append({
            "strategy": f"{strat}-median", "seed": -1,
            "best_score": statistics.median(r["best_score"] for r in per_seed),
            "feasible_count": statistics.median(
                r["feasible_count"] for r in per_seed),
            "best_tok_s": statistics.median(r["best_tok_s"] for r in per_seed),
        })
    write_search_comparison(out, rows)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="explore output directory (one run).")
def analyze(in_dir):
    """Compute cross-node statistics and render the report figures."""
    from .plots import (plot_lorenz, plot_mesh_scaling, plot_ppa_by_node,
                        plot_training_curve)

    run = Path(in_dir)
    ppa_path = run / "ppa_by_node.csv"
    if not ppa_path.exists():
        raise click.UsageError(f"{run} has no ppa_by_node.csv (not an explore "
                               "artifact directory?)")
    rows = read_ppa_csv(ppa_path)
    if not rows:
        raise click.UsageError("ppa_by_node.csv is empty")

    if len(rows) >= 3:
        write_statistical_analysis(run / "statistical_analysis.csv", rows)
    write_correlation_matrix(run / "correlation_matrix.csv", rows)
    write_efficiency_metrics(run / "efficiency_metrics.csv", rows)
    write_baseline_comparison(run / "baseline_comparison.csv",
                              cross_node_report(rows))

    plot_ppa_by_node(rows, run / "ppa_by_node.png")
    mesh_path = run / "mesh_scaling.csv"
    if mesh_path.exists():
        import csv as _csv
        with open(mesh_path, newline="") as fh:
            mesh_rows = list(_csv.DictReader(fh))
        if mesh_rows:
            plot_mesh_scaling(mesh_rows, run / "mesh_scaling.png")
    for node_dir in sorted(run.glob("*nm")):
        log = node_dir / "training_log.csv"
        if log.exists():
            plot_training_curve(log, node_dir / "training_curve.png")
        tiles = node_dir / "tiles.json"
        if tiles.exists():
            wmems = [t["wmem_kb"] for t in json.loads(tiles.read_text())]
            plot_lorenz(wmems, node_dir / "wmem_lorenz.png")
    click.echo(f"analysis written to {run}")


@main.command("describe-state")
def describe_state():
    """Dump the state-vector index table (index, name, normalization)."""
    click.echo("index,name,normalization,in_actor_subset")
    for idx, name, desc in STATE_FIELDS:
        click.echo(f"{idx},{name},\"{desc}\",{int(idx in SUBSET_IDX)}")


@main.command("describe-actions")
def describe_actions():
    """Dump the action-vector index table."""
    click.echo("index,group,name")
    for idx, group, name in ACTION_FIELDS:
        click.echo(f"{idx},{group},{name}")
    click.echo("discrete_0,mesh,delta_width")
    click.echo("discrete_1,mesh,delta_height")
    click.echo("discrete_2,supercluster,delta_x")
    click.echo("discrete_3,supercluster,delta_y")


if __name__ == "__main__":
    main()
