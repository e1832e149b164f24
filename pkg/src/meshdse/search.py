"""Design-space search driver: the per-node RL episode loop, a Pareto
archive with scalarized final selection, convergence detection, random and
grid baselines, and the result-table CSV emission.

One episode evaluates one chip configuration end to end: decode action,
place operators, run the analytical throughput/power/area models, score,
reward, store, update.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .arch import (KB, MB, Binding, ChipConfig, KvStrategy, NormRanges,
                   PpaEstimate, TccConfig, area_model, bytes_per_token,
                   kv_compaction, kv_spec_for, perf_gops, power_model,
                   ppa_score, throughput, uniform_chip)
from .graph import OperatorGraph, workload_features
from .kvcache import kv_total
from .partition import (BANK_KB, Placement, PlacementError,
                        cross_tile_bytes_per_token, eta_parallel, place)
from .planner import WorldModel, blend, mpc_active, mpc_plan
from .procnode import ProcessNode
from .rlenv import (ActionVector, Constraints, EpisodeContext, decode_action,
                    encode_state, feasible as is_feasible, project_action,
                    reward as compute_reward, subset_state)
from .sac import SacConfig, SacState, uniform_action

PLACEMENT_FAIL_REWARD = -5.0

def compress_reward(r: float) -> float:
    """Log-compress large negative rewards before they reach the replay
    buffer.  Constraint-violation penalties are cubic and unbounded, so a
    config far outside the budget can emit rewards of -1e9, which poisons
    the critic targets and replay priorities.  The compression is monotone
    (identity above -1), so "less infeasible" still earns strictly more
    reward and the gradient toward the feasible region survives.  The raw
    value still goes to the episode log.
    """
    return r if r >= -1.0 else -1.0 - math.log(-r)

# Named RNG sub-streams so every consumer draws from an independent,
# seed-reproducible stream.
STREAMS = {"init": 0, "policy": 1, "buffer": 2, "mpc": 3, "env": 4, "baseline": 5}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS[name],)))


# --- Pareto archive -----------------------------------------------------------

@dataclass(frozen=True)
class ArchiveEntry:
    perf: float
    power: float
    area: float
    cfg: ChipConfig
    est: PpaEstimate


def dominates(a: ArchiveEntry, b: ArchiveEntry) -> bool:
    """a dominates b: no worse on all of (perf up, power down, area down)
    and strictly better on at least one."""
    ge = a.perf >= b.perf and a.power <= b.power and a.area <= b.area
    strict = a.perf > b.perf or a.power < b.power or a.area < b.area
    return ge and strict


class ParetoArchive:
    def __init__(self):
        self.entries: list[ArchiveEntry] = []

    def insert(self, entry: ArchiveEntry) -> bool:
        for e in self.entries:
            if dominates(e, entry) or (e.perf == entry.perf
                                       and e.power == entry.power
                                       and e.area == entry.area):
                return False
        self.entries = [e for e in self.entries if not dominates(entry, e)]
        self.entries.append(entry)
        return True

    def select_final(self, weights: tuple[float, float, float]) -> ArchiveEntry:
        """Scalarized pick over frontier-normalized objectives; ties break to
        the lowest power, then lowest area."""
        if not self.entries:
            raise ValueError("archive is empty")
        perfs = [e.perf for e in self.entries]
        powers = [e.power for e in self.entries]
        areas = [e.area for e in self.entries]

        def norm(v, lo, hi):
            return 0.0 if hi == lo else (v - lo) / (hi - lo)

        total = sum(weights)
        alpha, beta, gamma = (w / total for w in weights)
        scored = []
        for e in self.entries:
            sc = (beta * norm(e.power, min(powers), max(powers))
                  + gamma * norm(e.area, min(areas), max(areas))
                  + alpha * (1.0 - norm(e.perf, min(perfs), max(perfs))))
            scored.append((sc, e.power, e.area, e))
        scored.sort(key=lambda t: t[:3])
        return scored[0][3]


# --- initial configuration -----------------------------------------------------

def initial_mesh(w_total: int) -> tuple[int, int]:
    """Smallest square-ish mesh whose minimum per-tile WMEM (256 KB) covers
    the weight footprint; clamped to 64x64."""
    need = max(1, math.ceil(w_total / (256 * KB)))
    w = max(1, math.ceil(math.sqrt(need)))
    h = max(1, math.ceil(need / w))
    return min(64, w), min(64, h)


def initial_config(g: OperatorGraph, node: ProcessNode) -> ChipConfig:
    mesh_w, mesh_h = initial_mesh(g.w_total)
    n = mesh_w * mesh_h
    # 1.5x headroom over the mean per-tile share: greedy placement leaves
    # fragmented free space, so an exact fit is routinely unplaceable
    wmem_kb = max(256, math.ceil(1.5 * g.w_total / n / KB / BANK_KB) * BANK_KB)
    tile = TccConfig(wmem_kb=wmem_kb)
    return uniform_chip(mesh_w, mesh_h, tile, f_clk=node.f_clk_max)


def config_signature(cfg: ChipConfig) -> str:
    t = cfg.tiles[0]
    key = (cfg.mesh_w, cfg.mesh_h, cfg.sc_x, cfg.sc_y, round(cfg.f_clk),
           cfg.dflit_bits, cfg.precision_mode.value, cfg.kv_strategy.value,
           round(cfg.alpha_spec, 3), round(cfg.kv_window_ratio, 3),
           t.fetch_size, t.stanum, t.vlen_bits, t.dmem_kb, t.wmem_kb, t.imem_kb)
    return hashlib.sha1(repr(key).encode()).hexdigest()[:12]


# --- evaluation ------------------------------------------------------------------

@dataclass
class Evaluation:
    est: PpaEstimate
    placement: Placement
    state: np.ndarray      # full 73-dim state after this evaluation
    reward: float
    m_used: float


def memory_used(g: OperatorGraph, cfg: ChipConfig) -> float:
    """On-chip footprint charged against the memory budget: weights plus the
    compacted KV cache plus one residual activation set."""
    spec = kv_spec_for(g, cfg)
    kv = kv_total(spec) / kv_compaction(cfg)
    act = 2 * int(g.meta.get("hidden", 64)) * int(g.meta.get("layers", 1)) * 2
    return g.w_total + kv + act


def evaluate(g: OperatorGraph, cfg: ChipConfig, node: ProcessNode,
             constraints: Constraints, ctx: EpisodeContext) -> Evaluation:
    """Full analytical evaluation of one configuration."""
    pl = place(g, cfg, ratios=ctx.rho)
    eta = eta_parallel(pl)
    cross = cross_tile_bytes_per_token(g, pl)
    tok_s, binding = throughput(cfg, g, cross, eta_par=eta)
    power = power_model(cfg, node, g, cross, tok_s=tok_s)
    perf = perf_gops(cfg, eta_util=eta)
    area = area_model(cfg, node)
    m_used = memory_used(g, cfg)

    score = ppa_score(perf, power["total"], area, constraints.norm_ranges(),
                      constraints.weights)
    feas = is_feasible(power["total"], area, m_used, constraints)
    est = PpaEstimate(power_mw=power["total"], power_breakdown=power,
                      perf_gops=perf, area_mm2=area, tok_s=tok_s,
                      score=score, feasible=feas, binding=binding)

    wf = workload_features(g)
    ctx.prev_ppa = est
    state = encode_state(wf, g, cfg, pl, node, constraints, ctx)
    r, _ = compute_reward(perf, power["total"], area, m_used,
                          float(state[40]), constraints)
    return Evaluation(est=est, placement=pl, state=state, reward=r, m_used=m_used)


def derive_constraints(g: OperatorGraph, node: ProcessNode,
                       weights: tuple[float, float, float] = (0.4, 0.4, 0.2),
                       headroom: float = 1.5) -> Constraints:
    """Workload-derived default budgets: evaluate the initial configuration
    and allow `headroom` times its power/area, twice its memory."""
    cfg = initial_config(g, node)
    ctx = EpisodeContext()
    ev = evaluate(g, cfg, node, Constraints(
        p_max_mw=1e12, a_max_mm2=1e12, m_budget_bytes=1e15,
        perf_range=(0.0, 1.0), power_range=(0.0, 1e12), area_range=(0.0, 1e12),
        weights=weights), ctx)
    n0 = cfg.n_cores
    wmem_max = max(1024, 4 * math.ceil(g.w_total / (n0 * KB) / BANK_KB) * BANK_KB)
    return Constraints(
        p_max_mw=headroom * ev.est.power_mw,
        a_max_mm2=headroom * ev.est.area_mm2,
        m_budget_bytes=2.0 * ev.m_used,
        weights=weights,
        perf_range=(0.0, 2.0 * ev.est.perf_gops),
        tok_range=(0.0, 10.0 * ev.est.tok_s),
        wmem_max_kb=wmem_max,
    )


# --- node run ---------------------------------------------------------------------

@dataclass
class NodeResult:
    node_nm: int
    best_cfg: ChipConfig | None
    best_est: PpaEstimate | None
    archive: ParetoArchive
    log: list[dict]
    feasible_count: int
    any_feasible: bool
    config_keys: list[str] = field(default_factory=list)

    @property
    def best_score(self) -> float:
        return self.best_est.score if self.best_est else math.inf


def run_node(node: ProcessNode, g: OperatorGraph, constraints: Constraints,
             budget: int, seed: int, sac_cfg: SacConfig | None = None,
             use_mpc: bool = True) -> NodeResult:
    """Train a SAC agent for `budget` episodes on one process node and return
    the scalarized best of the Pareto frontier."""
    sac_cfg = sac_cfg or SacConfig()
    if budget < sac_cfg.warmup:
        raise ValueError(f"budget {budget} < warmup {sac_cfg.warmup}")

    rng_init = substream(seed, "init")
    rng_policy = substream(seed, "policy")
    rng_buffer = substream(seed, "buffer")
    rng_mpc = substream(seed, "mpc")
    sac = SacState(sac_cfg, rng_init)
    wm = WorldModel(rng_init)
    archive = ParetoArchive()

    cfg = initial_config(g, node)
    ctx = EpisodeContext()
    ev = evaluate(g, cfg, node, constraints, ctx)
    state = ev.state
    feasible_count = int(ev.est.feasible)
    if ev.est.feasible:
        archive.insert(ArchiveEntry(ev.est.perf_gops, ev.est.power_mw,
                                    ev.est.area_mm2, cfg, ev.est))

    log: list[dict] = []
    keys = [config_signature(cfg)]
    best_effort = (cfg, ev.est)

    for episode in range(budget):
        s_sub = subset_state(state)
        a = sac.select_action(s_sub, rng_policy,
                              feasible_found=feasible_count > 0)
        if use_mpc and mpc_active(sac.epsilon.eps, wm):
            a_mpc = mpc_plan(lambda sb: sac.policy_mean_action(sb), wm,
                             s_sub, rng_mpc)
            a = blend(a_mpc, a)
        a = project_action(a)

        new_cfg, new_ctx = decode_action(a, cfg, node, constraints, ctx)
        try:
            ev = evaluate(g, new_cfg, node, constraints, new_ctx)
            failed = False
        except PlacementError:
            failed = True
        if failed:
            r = PLACEMENT_FAIL_REWARD
            next_state = state
            est = None
        else:
            r = ev.reward
            next_state = ev.state
            est = ev.est
            cfg, ctx = new_cfg, new_ctx
            keys.append(config_signature(cfg))

        done = episode == budget - 1
        sac.buffer.store(s_sub, a.continuous, compress_reward(r),
                         subset_state(next_state), done, disc=a.discrete)
        state = next_state

        stats = {"critic_loss": 0.0, "actor_loss": 0.0, "alpha": sac.alpha}
        if sac.step > sac_cfg.warmup and sac.buffer.size >= sac_cfg.batch_size:
            for _ in range(sac_cfg.updates_per_episode):
                stats = sac.update(rng_buffer)
            wm_batch, _, _ = sac.buffer.sample(
                min(64, sac.buffer.size), rng_buffer)
            wm.train_step(wm_batch["s"], wm_batch["a"], wm_batch["s_next"])

        if est is not None and est.feasible:
            feasible_count += 1
            archive.insert(ArchiveEntry(est.perf_gops, est.power_mw,
                                        est.area_mm2, cfg, est))
        if est is not None and est.score < best_effort[1].score:
            best_effort = (cfg, est)

        sac.epsilon.step(feasible_found=feasible_count > 0)
        log.append({
            "episode": episode, "epsilon": sac.epsilon.eps, "reward": r,
            "ppa_score": est.score if est else math.inf,
            "feasible": int(est.feasible) if est else 0,
            "alpha": stats["alpha"], "critic_loss": stats["critic_loss"],
            "actor_loss": stats["actor_loss"], "buffer_size": sac.buffer.size,
        })

    if archive.entries:
        final = archive.select_final(constraints.weights)
        best_cfg, best_est = final.cfg, final.est
        any_feasible = True
    else:
        best_cfg, best_est = best_effort
        any_feasible = False
    return NodeResult(node_nm=node.node_nm, best_cfg=best_cfg, best_est=best_est,
                      archive=archive, log=log, feasible_count=feasible_count,
                      any_feasible=any_feasible, config_keys=keys)


def run_all(nodes: list[ProcessNode], g: OperatorGraph,
            constraints_by_node: dict[int, Constraints], budgets: dict[int, int],
            seed: int, sac_cfg: SacConfig | None = None,
            use_mpc: bool = True) -> tuple[dict[int, NodeResult], int]:
    """Run every node with an independent seeded sub-stream; the global best
    is the node whose selected config has the lowest composite score."""
    results = {}
    for i, node in enumerate(nodes):
        results[node.node_nm] = run_node(
            node, g, constraints_by_node[node.node_nm], budgets[node.node_nm],
            seed + i, sac_cfg=sac_cfg, use_mpc=use_mpc)
    best_nm = min(results, key=lambda nm: results[nm].best_score)
    return results, best_nm


# --- baselines --------------------------------------------------------------------

def random_search(node: ProcessNode, g: OperatorGraph, constraints: Constraints,
                  budget: int, seed: int) -> NodeResult:
    """Uniform random action each episode; no learning."""
    rng = substream(seed, "baseline")
    cfg = initial_config(g, node)
    ctx = EpisodeContext()
    ev = evaluate(g, cfg, node, constraints, ctx)
    archive = ParetoArchive()
    feasible_count = int(ev.est.feasible)
    if ev.est.feasible:
        archive.insert(ArchiveEntry(ev.est.perf_gops, ev.est.power_mw,
                                    ev.est.area_mm2, cfg, ev.est))
    best_effort = (cfg, ev.est)
    log = []
    keys = [config_signature(cfg)]

    for episode in range(budget):
        a = project_action(uniform_action(rng))
        new_cfg, new_ctx = decode_action(a, cfg, node, constraints, ctx)
        try:
            ev = evaluate(g, new_cfg, node, constraints, new_ctx)
            est = ev.est
            cfg, ctx = new_cfg, new_ctx
            keys.append(config_signature(cfg))
            r = ev.reward
        except PlacementError:
            est, r = None, PLACEMENT_FAIL_REWARD
        if est is not None and est.feasible:
            feasible_count += 1
            archive.insert(ArchiveEntry(est.perf_gops, est.power_mw,
                                        est.area_mm2, cfg, est))
        if est is not None and est.score < best_effort[1].score:
            best_effort = (cfg, est)
        log.append({
            "episode": episode, "epsilon": 1.0, "reward": r,
            "ppa_score": est.score if est else math.inf,
            "feasible": int(est.feasible) if est else 0,
            "alpha": 0.0, "critic_loss": 0.0, "actor_loss": 0.0, "buffer_size": 0,
        })

    if archive.entries:
        final = archive.select_final(constraints.weights)
        return NodeResult(node.node_nm, final.cfg, final.est, archive, log,
                          feasible_count, True, keys)
    return NodeResult(node.node_nm, best_effort[0], best_effort[1], archive,
                      log, feasible_count, False, keys)


GRID_VLEN = (128, 512, 2048)
GRID_DMEM = (32, 128, 512)
GRID_FETCH = (2, 8, 16)


def grid_search(node: ProcessNode, g: OperatorGraph, constraints: Constraints,
                budget: int) -> NodeResult:
    """Lattice over (mesh dims, vlen, dmem, fetch), midpoints elsewhere,
    truncated to the episode budget."""
    base_w, base_h = initial_mesh(g.w_total)
    mesh_opts = sorted({max(1, min(64, base_w + d)) for d in (-2, 0, 2, 4)})
    archive = ParetoArchive()
    log = []
    keys = []
    feasible_count = 0
    best_effort = None
    episode = 0
    for mw in mesh_opts:
        for vlen in GRID_VLEN:
            for dmem in GRID_DMEM:
                for fetch in GRID_FETCH:
                    if episode >= budget:
                        break
                    mh = max(1, math.ceil(base_w * base_h / mw))
                    n = mw * mh
                    wmem_kb = max(256, math.ceil(
                        g.w_total / n / KB / BANK_KB) * BANK_KB)
                    tile = TccConfig(fetch_size=fetch, stanum=16,
                                     vlen_bits=vlen, dmem_kb=dmem,
                                     wmem_kb=wmem_kb, imem_kb=64,
                                     xr_wp=8, vr_wp=8, xdpnum=8, vdpnum=8)
                    cfg = uniform_chip(min(64, mw), min(64, mh), tile,
                                       f_clk=node.f_clk_max)
                    ctx = EpisodeContext()
                    try:
                        ev = evaluate(g, cfg, node, constraints, ctx)
                        est = ev.est
                        r = ev.reward
                        keys.append(config_signature(cfg))
                    except PlacementError:
                        est, r = None, PLACEMENT_FAIL_REWARD
                    if est is not None and est.feasible:
                        feasible_count += 1
                        archive.insert(ArchiveEntry(
                            est.perf_gops, est.power_mw, est.area_mm2, cfg, est))
                    if est is not None and (best_effort is None
                                            or est.score < best_effort[1].score):
                        best_effort = (cfg, est)
                    log.append({
                        "episode": episode, "epsilon": 0.0, "reward": r,
                        "ppa_score": est.score if est else math.inf,
                        "feasible": int(est.feasible) if est else 0,
                        "alpha": 0.0, "critic_loss": 0.0, "actor_loss": 0.0,
                        "buffer_size": 0,
                    })
                    episode += 1

    if archive.entries:
        final = archive.select_final(constraints.weights)
        return NodeResult(node.node_nm, final.cfg, final.est, archive, log,
                          feasible_count, True, keys)
    if best_effort is None:
        return NodeResult(node.node_nm, None, None, archive, log, 0, False, keys)
    return NodeResult(node.node_nm, best_effort[0], best_effort[1], archive,
                      log, feasible_count, False, keys)


# --- convergence --------------------------------------------------------------------

def convergence_check(scores: list[float], window: int, tol: float) -> bool:
    """True when the running best improved by less than `tol` over the last
    `window` entries."""
    if len(scores) <= window:
        return False
    best = []
    cur = math.inf
    for s in scores:
        cur = min(cur, s)
        best.append(cur)
    return best[-window - 1] - best[-1] < tol


# --- CSV emission ---------------------------------------------------------------------

TRAINING_LOG_HEADER = ["episode", "epsilon", "reward", "ppa_score", "feasible",
                       "alpha", "critic_loss", "actor_loss", "buffer_size"]
PPA_BY_NODE_HEADER = ["process_node", "mesh_config", "cores", "freq_mhz",
                      "power_mw", "perf_gops", "area_mm2", "ppa_score", "tok_s"]


def write_training_log(path: str | Path, log: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRAINING_LOG_HEADER)
        w.writeheader()
        for row in log:
            w.writerow({k: _fmt(row[k]) for k in TRAINING_LOG_HEADER})


def ppa_row(node_nm: int, cfg: ChipConfig, est: PpaEstimate) -> dict:
    return {
        "process_node": node_nm,
        "mesh_config": f"{cfg.mesh_w}x{cfg.mesh_h}",
        "cores": cfg.n_cores,
        "freq_mhz": _fmt(cfg.f_clk / 1e6),
        "power_mw": _fmt(est.power_mw),
        "perf_gops": _fmt(est.perf_gops),
        "area_mm2": _fmt(est.area_mm2),
        "ppa_score": _fmt(est.score),
        "tok_s": _fmt(est.tok_s),
    }


def write_ppa_by_node(path: str | Path, results: dict[int, NodeResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PPA_BY_NODE_HEADER)
        w.writeheader()
        for nm in sorted(results):
            r = results[nm]
            if r.best_cfg is not None:
                w.writerow(ppa_row(nm, r.best_cfg, r.best_est))


def write_mesh_scaling(path: str | Path, results: dict[int, NodeResult]) -> None:
    header = ["process_node", "mesh_w", "mesh_h", "cores", "tok_s", "binding"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for nm in sorted(results):
            r = results[nm]
            if r.best_cfg is None:
                continue
            w.writerow({
                "process_node": nm, "mesh_w": r.best_cfg.mesh_w,
                "mesh_h": r.best_cfg.mesh_h, "cores": r.best_cfg.n_cores,
                "tok_s": _fmt(r.best_est.tok_s),
                "binding": r.best_est.binding.value,
            })


def write_training_stats(path: str | Path, results: dict[int, NodeResult],
                         window: int = 50, tol: float = 1e-4) -> None:
    header = ["process_node", "episodes", "feasible_count", "best_score",
              "final_epsilon", "converged"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for nm in sorted(results):
            r = results[nm]
            scores = [row["ppa_score"] for row in r.log]
            w.writerow({
                "process_node": nm, "episodes": len(r.log),
                "feasible_count": r.feasible_count,
                "best_score": _fmt(r.best_score),
                "final_epsilon": _fmt(r.log[-1]["epsilon"]) if r.log else "",
                "converged": int(convergence_check(scores, window, tol)),
            })


def write_search_comparison(path: str | Path, rows: list[dict]) -> None:
    header = ["strategy", "seed", "best_score", "feasible_count", "best_tok_s"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in header})


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6g}"
    return v
