"""Operation-level partitioning across mesh tiles: communication-aware
greedy placement, load statistics, post-RL heterogeneous per-tile parameter
derivation, and region-level allocation statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .arch import BANK_KB, KB, ChipConfig, TccConfig, TCC_RANGES, avg_hops
from .graph import OperatorGraph, OpKind

PARTITIONABLE_KINDS = {OpKind.MATMUL, OpKind.CONV}
RHO_BASE = 0.3

# Placement-score term weights: load, hop distance, imbalance, centrality.
SCORE_WEIGHTS = (1.0, 0.5, 0.5, 0.25)

VLEN_CHOICES = (128, 256, 512, 1024, 2048)


class PlacementError(RuntimeError):
    pass


@dataclass
class Placement:
    mesh_w: int
    mesh_h: int
    # op id -> list of (tile index, workload fraction)
    assignments: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    tile_load: list[float] = field(default_factory=list)       # FLOPs
    tile_wmem_used: list[float] = field(default_factory=list)  # bytes
    tile_dmem_used: list[float] = field(default_factory=list)  # bytes
    cross_tile_bytes: float = 0.0

    @property
    def n_tiles(self) -> int:
        return self.mesh_w * self.mesh_h

    def coords(self, tile: int) -> tuple[int, int]:
        return tile % self.mesh_w, tile // self.mesh_w

    def load_variance(self) -> float:
        n = self.n_tiles
        mean = sum(self.tile_load) / n
        return sum((l - mean) ** 2 for l in self.tile_load) / n

    def max_min_ratio(self) -> float:
        mx = max(self.tile_load)
        mn = min(self.tile_load)
        if mx == 0:
            return 1.0
        return mx / mn if mn > 0 else math.inf

    def balance_score(self) -> float:
        """min/max tile load; 1.0 for perfect balance, 1.0 for an empty mesh."""
        mx = max(self.tile_load)
        if mx == 0:
            return 1.0
        return min(self.tile_load) / mx


def partition_ratio(base: float, delta: float) -> float:
    return min(1.0, max(0.0, base + delta))


def target_cores(rho: float, n_total: int) -> int:
    """ceil(rho * N); floored to 1 so every op has a home."""
    return max(1, math.ceil(rho * n_total))


def _manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def placement_score(tile: int, producer_tiles: list[int], placement: Placement,
                    total_flops: float,
                    weights: tuple[float, float, float, float] = SCORE_WEIGHTS) -> float:
    """Composite per-tile cost (lower = better): current load share, mean hop
    distance to producer tiles, load imbalance above the mesh mean, and
    distance from the mesh center."""
    w_load, w_hop, w_imb, w_cent = weights
    xy = placement.coords(tile)
    n = placement.n_tiles

    # load terms are normalized by tile count so that stacking a whole
    # workload on one tile costs about as much as one extra NoC hop;
    # communication locality then dominates at the default weights
    load = placement.tile_load[tile]
    load_norm = load / total_flops / n if total_flops > 0 else 0.0

    if producer_tiles:
        hop = sum(_manhattan(xy, placement.coords(p)) for p in producer_tiles) \
            / len(producer_tiles)
    else:
        hop = 0.0

    mean_load = sum(placement.tile_load) / n
    imb = max(0.0, load - mean_load) / total_flops / n if total_flops > 0 else 0.0

    cx = (placement.mesh_w - 1) / 2
    cy = (placement.mesh_h - 1) / 2
    max_d = cx + cy
    cent = (abs(xy[0] - cx) + abs(xy[1] - cy)) / max_d if max_d > 0 else 0.0

    return w_load * load_norm + w_hop * hop + w_imb * imb + w_cent * cent


def _score_all(producer_tiles: list[int], placement: Placement,
               total_flops: float,
               weights: tuple[float, float, float, float]) -> list[float]:
    """Per-tile placement scores for one op, identical to calling
    `placement_score` on every tile but with the mesh-wide terms hoisted:
    the mean load is computed once and the producer hop sums are built per
    axis (Manhattan distance is separable), so scoring is linear in the
    tile count instead of quadratic."""
    w_load, w_hop, w_imb, w_cent = weights
    mw, mh = placement.mesh_w, placement.mesh_h
    n = placement.n_tiles
    mean_load = sum(placement.tile_load) / n

    n_prod = len(producer_tiles)
    if n_prod:
        px = [t % mw for t in producer_tiles]
        py = [t // mw for t in producer_tiles]
        dx = [sum(abs(x - v) for v in px) for x in range(mw)]
        dy = [sum(abs(y - v) for v in py) for y in range(mh)]

    cx = (mw - 1) / 2
    cy = (mh - 1) / 2
    max_d = cx + cy

    scores = []
    for tile in range(n):
        x, y = tile % mw, tile // mw
        load = placement.tile_load[tile]
        load_norm = load / total_flops / n if total_flops > 0 else 0.0
        hop = (dx[x] + dy[y]) / n_prod if n_prod else 0.0
        imb = max(0.0, load - mean_load) / total_flops / n \
            if total_flops > 0 else 0.0
        cent = (abs(x - cx) + abs(y - cy)) / max_d if max_d > 0 else 0.0
        scores.append(w_load * load_norm + w_hop * hop + w_imb * imb
                      + w_cent * cent)
    return scores


def place(g: OperatorGraph, cfg: ChipConfig,
          ratios: dict[OpKind, float] | None = None,
          score_weights: tuple[float, float, float, float] = SCORE_WEIGHTS) -> Placement:
    """Assign every operator to one or more tiles.

    Partitionable kinds split evenly across target_cores tiles picked greedily
    by ascending placement score; WMEM capacity is respected per tile.
    """
    if ratios is None:
        ratios = {}
    n = cfg.n_cores
    pl = Placement(mesh_w=cfg.mesh_w, mesh_h=cfg.mesh_h,
                   tile_load=[0.0] * n, tile_wmem_used=[0.0] * n,
                   tile_dmem_used=[0.0] * n)
    wmem_cap = [t.wmem_kb * KB for t in cfg.tiles]
    total_flops = float(g.total_flops)

    producers: dict[int, list[tuple[int, int]]] = {nd.id: [] for nd in g.nodes}
    for src, dst, nbytes in g.edges:
        producers[dst].append((src, nbytes))
    by_id = {nd.id: nd for nd in g.nodes}

    for nid in g.topological_order():
        op = by_id[nid]
        if op.kind in PARTITIONABLE_KINDS:
            rho = ratios.get(op.kind, RHO_BASE)
        else:
            # non-partitionable kinds stay single-tile unless a general
            # ratio is explicitly supplied
            rho = ratios.get("general", 0.0)
        n_target = target_cores(rho, n)

        prod_tiles = sorted({t for pid, _ in producers[nid]
                             for t, _ in pl.assignments.get(pid, [])})
        scores = _score_all(prod_tiles, pl, total_flops, score_weights)
        scored = sorted(range(n), key=lambda t: (scores[t], t))
        chosen = _fit_tiles(op.weight_bytes, n_target, scored,
                            pl.tile_wmem_used, wmem_cap)
        if not chosen:
            raise PlacementError(
                f"op {nid} ({op.kind.value}, {op.weight_bytes} B weights) "
                f"does not fit in any tile's remaining WMEM")
        frac = 1.0 / len(chosen)
        pl.assignments[nid] = [(t, frac) for t in chosen]
        for t in chosen:
            pl.tile_load[t] += op.flops * frac
            pl.tile_wmem_used[t] += op.weight_bytes * frac
            pl.tile_dmem_used[t] += (op.input_bytes + op.output_bytes) * frac

    pl.cross_tile_bytes = _cross_tile_bytes(g, pl)
    return pl


def _fit_tiles(weight_bytes: float, n_target: int, scored: list[int],
               used: list[float], cap: list[float]) -> list[int]:
    """Pick tiles for an op's weight shards, preferring the requested tile
    count.  When per-tile WMEM capacity cannot hold a 1/n_target share, the
    op shards across more tiles (or fewer, if larger shares fit); an empty
    result means no tile set works at all.
    """
    n = len(scored)

    def fits(k: int) -> list[int]:
        share = weight_bytes / k
        ok = [t for t in scored if used[t] + share <= cap[t]]
        return ok[:k] if len(ok) >= k else []

    for k in range(n_target, 0, -1):
        chosen = fits(k)
        if chosen:
            return chosen
    max_free = max(cap[t] - used[t] for t in scored)
    if max_free <= 0:
        return []
    k = max(n_target + 1, math.ceil(weight_bytes / max_free))
    while k <= n:
        chosen = fits(k)
        if chosen:
            return chosen
        k += 1
    return []


def _cross_tile_bytes(g: OperatorGraph, pl: Placement) -> float:
    total = 0.0
    for src, dst, nbytes in g.edges:
        src_tiles = {t for t, _ in pl.assignments.get(src, [])}
        dst_tiles = {t for t, _ in pl.assignments.get(dst, [])}
        if src_tiles and dst_tiles and src_tiles != dst_tiles:
            total += nbytes
    return total


def cross_tile_bytes_per_token(g: OperatorGraph, pl: Placement) -> float:
    seq_len = max(1, int(g.meta.get("seq_len", 1)))
    return pl.cross_tile_bytes / seq_len


def eta_parallel(pl: Placement) -> float:
    """Parallel efficiency for the compute ceiling: balance discounted by
    mean hop distance, clamped to [0.1, 1]."""
    eta = pl.balance_score() * (1.0 - 0.02 * avg_hops(pl.mesh_w, pl.mesh_h))
    return min(1.0, max(0.1, eta))


def _quantize(value: float, lo: int, hi: int) -> int:
    return min(hi, max(lo, round(value)))


def _nearest_pow2(value: float, lo: int, hi: int) -> int:
    v = min(hi, max(lo, value))
    exp = round(math.log2(v))
    return min(hi, max(lo, 2 ** exp))


def _bank_round(kb: float, lo: int, hi: int | None) -> int:
    banks = max(1, math.ceil(kb / BANK_KB))
    v = banks * BANK_KB
    v = max(lo, v)
    return min(hi, v) if hi is not None else v


def derive_heterogeneous(cfg: ChipConfig, pl: Placement, w_total: int) -> ChipConfig:
    """Post-RL derivation of per-tile FETCH, VLEN, DMEM, IMEM, and WMEM from
    tile load and weight footprint.  STANUM and DFLIT stay uniform.  The
    resulting tile set still covers the full weight footprint.
    """
    n = cfg.n_cores
    mean_load = sum(pl.tile_load) / n
    tiles = []
    wmem_sum = 0
    for i, base in enumerate(cfg.tiles):
        rel = pl.tile_load[i] / mean_load if mean_load > 0 else 1.0
        fetch = _quantize(base.fetch_size * rel, *TCC_RANGES["fetch_size"])
        vlen = _nearest_pow2(base.vlen_bits * rel, *TCC_RANGES["vlen_bits"])
        dmem = _bank_round(base.dmem_kb * rel, *TCC_RANGES["dmem_kb"])
        imem = _quantize(base.imem_kb * rel, *TCC_RANGES["imem_kb"])
        wmem = _bank_round(pl.tile_wmem_used[i] / KB, TCC_RANGES["wmem_kb"][0], None)
        wmem_sum += wmem * KB
        tiles.append(replace(base, fetch_size=fetch, vlen_bits=vlen,
                             dmem_kb=dmem, imem_kb=imem, wmem_kb=wmem))
    if wmem_sum < w_total:
        # spread the shortfall across tiles in whole banks
        extra_kb = math.ceil((w_total - wmem_sum) / KB / n / BANK_KB) * BANK_KB
        tiles = [replace(t, wmem_kb=t.wmem_kb + extra_kb) for t in tiles]
    out = replace(cfg, tiles=tiles)
    return out


def gini(values: list[float]) -> float:
    """Gini coefficient from the sorted Lorenz curve; 0 for uniform."""
    n = len(values)
    if n == 0:
        return 0.0
    xs = sorted(values)
    total = sum(xs)
    if total == 0:
        return 0.0
    cum = 0.0
    for i, x in enumerate(xs, start=1):
        cum += (2 * i - n - 1) * x
    return cum / (n * total)


@dataclass(frozen=True)
class RegionStats:
    regions: list[dict]       # per-region mean/std for wmem, fetch + dflit
    wmem_hist: list[int]
    wmem_bin_edges: list[float]
    wmem_cdf: list[float]
    gini_wmem: float


def region_stats(cfg: ChipConfig, n_bins: int = 10) -> RegionStats:
    """3x3-grid region summaries plus the WMEM histogram/CDF and Gini."""
    wmems = [t.wmem_kb / 1024 for t in cfg.tiles]  # MB
    fetches = [t.fetch_size for t in cfg.tiles]

    regions = []
    rw = max(1, math.ceil(cfg.mesh_w / 3))
    rh = max(1, math.ceil(cfg.mesh_h / 3))
    for ry in range(3):
        for rx in range(3):
            idxs = [y * cfg.mesh_w + x
                    for y in range(ry * rh, min((ry + 1) * rh, cfg.mesh_h))
                    for x in range(rx * rw, min((rx + 1) * rw, cfg.mesh_w))]
            if not idxs:
                continue
            ws = [wmems[i] for i in idxs]
            fs = [fetches[i] for i in idxs]
            regions.append({
                "region": f"r{ry}{rx}",
                "tiles": len(idxs),
                "avg_wmem_mb": _mean(ws), "std_wmem_mb": _std(ws),
                "avg_fetch": _mean(fs), "std_fetch": _std(fs),
                "avg_dflit_bits": float(cfg.dflit_bits),
            })

    lo, hi = min(wmems), max(wmems)
    span = (hi - lo) or 1.0
    hist = [0] * n_bins
    for w in wmems:
        b = min(n_bins - 1, int((w - lo) / span * n_bins))
        hist[b] += 1
    edges = [lo + span * i / n_bins for i in range(n_bins + 1)]
    total = len(wmems)
    cdf, run = [], 0
    for h in hist:
        run += h
        cdf.append(run / total)

    return RegionStats(regions=regions, wmem_hist=hist, wmem_bin_edges=edges,
                       wmem_cdf=cdf, gini_wmem=gini(wmems))


def tiles_to_json(cfg: ChipConfig) -> list[dict]:
    """Per-tile config artifact: one object per tile."""
    out = []
    for i, t in enumerate(cfg.tiles):
        out.append({
            "x": i % cfg.mesh_w, "y": i // cfg.mesh_w,
            "fetch": t.fetch_size, "stanum": t.stanum, "vlen": t.vlen_bits,
            "dmem_kb": t.dmem_kb, "wmem_kb": t.wmem_kb, "imem_kb": t.imem_kb,
        })
    return out


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _std(xs: list[float]) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))
