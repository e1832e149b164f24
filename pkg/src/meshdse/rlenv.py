"""MDP surface: 73-dim state encoding (52-dim actor subset), delta-style
action decoding with constraint projection, reward computation, and the
constraints/budgets configuration.

Continuous actions are full-span deltas: a value of +1 saturates the
parameter at its upper architectural bound, -1 at the lower bound, and 0
leaves an on-grid configuration unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .arch import (BANK_KB, DFLIT_RANGE, KB, MESH_RANGE, TCC_RANGES, ChipConfig,
                   KvStrategy, NormRanges, PpaEstimate, TccConfig, avg_hops,
                   noc_latency)
from .graph import OpKind, OperatorGraph, WorkloadFeatures
from .partition import Placement, partition_ratio
from .procnode import ProcessNode

STATE_DIM = 73
ACTION_DIM_CONT = 30
ACTION_DIM_DISC = 4
DISCRETE_DELTAS = (-2, -1, 0, 1, 2)

# Indices dropped from the full state to form the 52-dim actor subset:
# op-partition (33-36), per-TCC hazards (41-44), streaming (46-49),
# precision distribution (59-64), SC topology (67-69).
DEFAULT_SUBSET_DROP = tuple(
    list(range(33, 37)) + list(range(41, 45)) + list(range(46, 50))
    + list(range(59, 65)) + list(range(67, 70))
)
SUBSET_IDX = tuple(i for i in range(STATE_DIM) if i not in DEFAULT_SUBSET_DROP)
SUBSET_DIM = len(SUBSET_IDX)  # 52

STATE_FIELDS = [
    (0, "instruction_count", "log10(1 + instructions) / 12"),
    (1, "ilp", "1 - critical path / node count"),
    (2, "memory_intensity", "bytes/FLOP clipped to [0,4] / 4"),
    (3, "vector_util", "vectorizable FLOP fraction"),
    (4, "matmul_ratio", "MatMul FLOP fraction"),
    (5, "mesh_w", "mesh width / 64"),
    (6, "mesh_h", "mesh height / 64"),
    (7, "n_cores", "core count / 4096"),
    (8, "sc_x", "supercluster x / 8"),
    (9, "sc_y", "supercluster y / 8"),
    (10, "fetch_mean", "mean FETCH / 16"),
    (11, "stanum_mean", "mean STANUM / 32"),
    (12, "vlen_mean", "log2(mean VLEN / 128) / 4"),
    (13, "dmem_mean", "mean DMEM KB / 512"),
    (14, "wmem_mean", "mean WMEM KB / adaptive max"),
    (15, "imem_mean", "mean IMEM KB / 128"),
    (16, "dflit", "DFLIT bits / 8192"),
    (17, "xr_wp_mean", "mean XR_WP / 16"),
    (18, "vr_wp_mean", "mean VR_WP / 16"),
    (19, "xdpnum_mean", "mean XDPNUM / 16"),
    (20, "vdpnum_mean", "mean VDPNUM / 16"),
    (21, "node_nm", "feature size / 28"),
    (22, "precision_mode", "precision enum index / 5"),
    (23, "batch", "log2(batch) / 8"),
    (24, "kv_strategy", "kv quantization enum index / 2"),
    (25, "alpha_spec", "alpha_spec - 1 (in [0,1])"),
    (26, "dmem_f_in", "DMEM input fraction"),
    (27, "dmem_f_out", "DMEM output fraction"),
    (28, "dmem_f_scratch", "DMEM scratch fraction"),
    (29, "load_variance", "normalized tile-load variance"),
    (30, "load_max_min", "min/max tile load (1 = balanced)"),
    (31, "balance_score", "placement balance score"),
    (32, "load_mean", "mean tile load / total FLOPs"),
    (33, "rho_matmul", "MatMul partition ratio"),
    (34, "rho_conv", "Conv partition ratio"),
    (35, "rho_general", "general partition ratio"),
    (36, "rho_mean", "mean partition ratio"),
    (37, "raw_hazard", "same-tile edge fraction"),
    (38, "war_hazard", "mean fan-in / max fan-in"),
    (39, "waw_hazard", "multi-producer node fraction"),
    (40, "hazard_total", "mean of the three hazard proxies"),
    (41, "tcc_hazard_mean", "per-tile hazard mean"),
    (42, "tcc_hazard_max", "per-tile hazard max"),
    (43, "tcc_hazard_std", "per-tile hazard std"),
    (44, "tcc_hazard_frac", "fraction of tiles above mean hazard"),
    (45, "frequency", "f_clk / node f_clk_max"),
    (46, "stream_in", "input streaming ratio"),
    (47, "stream_out", "output streaming ratio"),
    (48, "pipeline_depth", "critical path / node count"),
    (49, "stream_overlap", "vector_util * ilp overlap proxy"),
    (50, "obs_power", "previous power / power budget (clipped to 2)"),
    (51, "obs_perf", "previous normalized performance"),
    (52, "obs_area", "previous area / area budget (clipped to 2)"),
    (53, "obs_tok_s", "previous normalized tokens/s"),
    (54, "obs_efficiency", "previous perf_norm / (power_norm + 0.1)"),
    (55, "wpart_mean", "mean per-tile load fraction"),
    (56, "wpart_std", "std of per-tile load fractions"),
    (57, "wpart_max", "max per-tile load fraction"),
    (58, "wpart_active", "fraction of tiles with nonzero load"),
    (59, "prec_fp32", "FP32 FLOP fraction"),
    (60, "prec_fp16", "FP16 FLOP fraction"),
    (61, "prec_bf16", "BF16 FLOP fraction"),
    (62, "prec_fp8", "FP8 FLOP fraction"),
    (63, "prec_int8", "INT8 FLOP fraction"),
    (64, "prec_mixed", "mixed-precision FLOP fraction"),
    (65, "scalar_ratio", "scalar instruction fraction"),
    (66, "vector_ratio", "vector instruction fraction"),
    (67, "sc_eff_tcc", "active tile count / 4096"),
    (68, "sc_avg_hops", "(M+N)/3 / 42.67"),
    (69, "sc_latency", "NoC latency cycles / 256"),
    (70, "llm_batch", "log2(batch) / 8"),
    (71, "llm_kv_strategy", "kv quantization enum index / 2"),
    (72, "llm_kv_compression", "1 / compaction factor"),
]

# Continuous action layout (all in [-1, 1]); group, name, index.
ACTION_FIELDS = [
    (0, "tcc", "fetch_size"),
    (1, "tcc", "stanum"),
    (2, "tcc", "vlen_bits"),
    (3, "tcc", "dmem_kb"),
    (4, "tcc", "wmem_kb"),
    (5, "tcc", "imem_kb"),
    (6, "tcc", "dflit_bits"),
    (7, "tcc", "xr_wp"),
    (8, "tcc", "vr_wp"),
    (9, "tcc", "xdpnum"),
    (10, "tcc", "vdpnum"),
    (11, "tcc", "f_clk"),
    (12, "tcc", "precision_shift"),
    (13, "tcc", "alpha_spec"),
    (14, "tcc", "kv_window_ratio"),
    (15, "mem_load", "dmem_f_in"),
    (16, "mem_load", "dmem_f_out"),
    (17, "mem_load", "load_balance_a"),
    (18, "mem_load", "load_balance_b"),
    (19, "op_part", "delta_matmul"),
    (20, "op_part", "delta_conv"),
    (21, "op_part", "delta_general"),
    (22, "streaming", "stream_in"),
    (23, "streaming", "stream_out"),
    (24, "workload_part", "sub_matmul"),
    (25, "workload_part", "all_reduce"),
    (26, "spare", "spare_0"),
    (27, "spare", "spare_1"),
    (28, "spare", "spare_2"),
    (29, "spare", "spare_3"),
]
TCC_ACTION_IDX = tuple(i for i, grp, _ in ACTION_FIELDS if grp == "tcc")


@dataclass(frozen=True)
class ActionVector:
    continuous: np.ndarray  # (30,), values in [-1, 1]
    discrete: tuple[int, int, int, int]  # mesh dw, dh, sc dx, dy in {-2..2}

    def __post_init__(self):
        c = np.asarray(self.continuous, dtype=float)
        if c.shape != (ACTION_DIM_CONT,):
            raise ValueError(f"continuous action must have shape (30,), got {c.shape}")
        object.__setattr__(self, "continuous", c)


def zero_action() -> ActionVector:
    return ActionVector(np.zeros(ACTION_DIM_CONT), (0, 0, 0, 0))


@dataclass
class Constraints:
    p_max_mw: float
    a_max_mm2: float
    m_budget_bytes: float
    weights: tuple[float, float, float] = (0.4, 0.4, 0.2)
    perf_range: tuple[float, float] = (0.0, 1.0)
    power_range: tuple[float, float] | None = None   # default [0, 2 * budget]
    area_range: tuple[float, float] | None = None
    tok_range: tuple[float, float] = (0.0, 1e5)
    lambda_mem: float = 1.0
    lambda_hazard: float = 0.5
    s_mag: float = 1.0
    wmem_max_kb: int = 1 << 20

    def norm_ranges(self) -> NormRanges:
        return NormRanges(
            perf=self.perf_range,
            power=self.power_range or (0.0, 2.0 * self.p_max_mw),
            area=self.area_range or (0.0, 2.0 * self.a_max_mm2),
        )

    def to_json(self) -> dict:
        return {
            "p_max_mw": self.p_max_mw, "a_max_mm2": self.a_max_mm2,
            "m_budget_bytes": self.m_budget_bytes,
            "weights": list(self.weights),
            "perf_range": list(self.perf_range),
            "power_range": list(self.power_range) if self.power_range else None,
            "area_range": list(self.area_range) if self.area_range else None,
            "tok_range": list(self.tok_range),
            "lambda_mem": self.lambda_mem, "lambda_hazard": self.lambda_hazard,
            "s_mag": self.s_mag, "wmem_max_kb": self.wmem_max_kb,
        }

    @classmethod
    def from_json(cls, blob: dict) -> "Constraints":
        def pair(v):
            return tuple(v) if v is not None else None
        return cls(
            p_max_mw=float(blob["p_max_mw"]),
            a_max_mm2=float(blob["a_max_mm2"]),
            m_budget_bytes=float(blob["m_budget_bytes"]),
            weights=tuple(blob.get("weights", (0.4, 0.4, 0.2))),
            perf_range=pair(blob.get("perf_range", (0.0, 1.0))),
            power_range=pair(blob.get("power_range")),
            area_range=pair(blob.get("area_range")),
            tok_range=pair(blob.get("tok_range", (0.0, 1e5))),
            lambda_mem=float(blob.get("lambda_mem", 1.0)),
            lambda_hazard=float(blob.get("lambda_hazard", 0.5)),
            s_mag=float(blob.get("s_mag", 1.0)),
            wmem_max_kb=int(blob.get("wmem_max_kb", 1 << 20)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Constraints":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class EpisodeContext:
    """Non-config episode state threaded through encode/decode."""
    dmem_f_in: float = 0.3
    dmem_f_out: float = 0.3
    rho: dict = field(default_factory=lambda: {
        OpKind.MATMUL: 0.3, OpKind.CONV: 0.3, "general": 0.0})
    stream_in: float = 0.5
    stream_out: float = 0.5
    prev_ppa: PpaEstimate | None = None


# --- state encoding -----------------------------------------------------------

PRECISION_ORDER = ("FP32", "FP16", "BF16", "FP8", "INT8", "Mixed")
KV_ORDER = (KvStrategy.FP16, KvStrategy.INT8, KvStrategy.INT4)


def hazard_proxies(g: OperatorGraph, pl: Placement) -> tuple[float, float, float]:
    """(RAW, WAR, WAW) proxies from placement and graph fan-in statistics."""
    if not g.edges:
        return 0.0, 0.0, 0.0
    same_tile = 0
    for src, dst, _ in pl_edges(g, pl):
        if src & dst:
            same_tile += 1
    raw = same_tile / len(g.edges)
    fan_in: dict[int, int] = {}
    for _, dst, _ in g.edges:
        fan_in[dst] = fan_in.get(dst, 0) + 1
    counts = list(fan_in.values())
    war = (sum(counts) / len(counts)) / max(counts)
    waw = sum(1 for c in counts if c > 1) / len(g.nodes)
    return raw, war, waw


def pl_edges(g: OperatorGraph, pl: Placement):
    for src, dst, nbytes in g.edges:
        yield ({t for t, _ in pl.assignments.get(src, [])},
               {t for t, _ in pl.assignments.get(dst, [])},
               nbytes)


def encode_state(wf: WorkloadFeatures, g: OperatorGraph, cfg: ChipConfig,
                 pl: Placement, node: ProcessNode, constraints: Constraints,
                 ctx: EpisodeContext) -> np.ndarray:
    """Deterministic full 73-dim state; see STATE_FIELDS for the per-index
    normalization scheme."""
    s = np.zeros(STATE_DIM)
    n = cfg.n_cores
    tiles = cfg.tiles

    def mean(attr):
        return sum(getattr(t, attr) for t in tiles) / n

    s[0] = min(1.0, math.log10(1.0 + wf.instruction_count) / 12.0)
    s[1] = wf.ilp
    s[2] = wf.memory_intensity
    s[3] = wf.vector_util
    s[4] = wf.matmul_ratio

    s[5] = cfg.mesh_w / 64
    s[6] = cfg.mesh_h / 64
    s[7] = n / 4096
    s[8] = cfg.sc_x / 8
    s[9] = cfg.sc_y / 8
    s[10] = mean("fetch_size") / 16
    s[11] = mean("stanum") / 32
    s[12] = math.log2(max(mean("vlen_bits"), 128) / 128) / 4
    s[13] = mean("dmem_kb") / 512
    s[14] = min(1.0, mean("wmem_kb") / constraints.wmem_max_kb)
    s[15] = mean("imem_kb") / 128
    s[16] = cfg.dflit_bits / 8192
    s[17] = mean("xr_wp") / 16
    s[18] = mean("vr_wp") / 16
    s[19] = mean("xdpnum") / 16
    s[20] = mean("vdpnum") / 16
    s[21] = node.node_nm / 28
    s[22] = PRECISION_ORDER.index(cfg.precision_mode.value) / 5
    s[23] = min(1.0, math.log2(max(1, cfg.batch)) / 8)
    s[24] = KV_ORDER.index(cfg.kv_strategy) / 2
    s[25] = cfg.alpha_spec - 1.0

    f_scr = max(0.0, 1.0 - ctx.dmem_f_in - ctx.dmem_f_out)
    s[26], s[27], s[28] = ctx.dmem_f_in, ctx.dmem_f_out, f_scr

    total_flops = max(1.0, float(g.total_flops))
    var = pl.load_variance()
    mean_load = sum(pl.tile_load) / n
    s[29] = min(1.0, math.sqrt(var) / total_flops * n)
    mx = max(pl.tile_load)
    s[30] = (min(pl.tile_load) / mx) if mx > 0 else 1.0
    s[31] = pl.balance_score()
    s[32] = mean_load / total_flops

    rho_m = ctx.rho.get(OpKind.MATMUL, 0.3)
    rho_c = ctx.rho.get(OpKind.CONV, 0.3)
    rho_g = ctx.rho.get("general", 0.0)
    s[33], s[34], s[35] = rho_m, rho_c, rho_g
    s[36] = (rho_m + rho_c + rho_g) / 3

    raw, war, waw = hazard_proxies(g, pl)
    s[37], s[38], s[39] = raw, war, waw
    s[40] = (raw + war + waw) / 3

    # per-tile hazard aggregates from load-weighted proxies
    fracs = [l / total_flops for l in pl.tile_load]
    haz = [f * s[40] for f in fracs]
    hmean = sum(haz) / n
    s[41] = hmean
    s[42] = max(haz)
    s[43] = math.sqrt(sum((h - hmean) ** 2 for h in haz) / n)
    s[44] = sum(1 for h in haz if h > hmean) / n

    s[45] = cfg.f_clk / node.f_clk_max

    s[46] = ctx.stream_in
    s[47] = ctx.stream_out
    s[48] = 1.0 - wf.ilp
    s[49] = wf.vector_util * wf.ilp

    if ctx.prev_ppa is not None:
        p = ctx.prev_ppa
        s[50] = min(2.0, p.power_mw / constraints.p_max_mw)
        rng = constraints.norm_ranges()
        s[51] = min(1.0, max(0.0, (p.perf_gops - rng.perf[0])
                             / (rng.perf[1] - rng.perf[0])))
        s[52] = min(2.0, p.area_mm2 / constraints.a_max_mm2)
        tlo, thi = constraints.tok_range
        s[53] = min(1.0, max(0.0, (p.tok_s - tlo) / (thi - tlo)))
        s[54] = s[51] / (s[50] + 0.1)

    fmean = sum(fracs) / n
    s[55] = fmean
    s[56] = math.sqrt(sum((f - fmean) ** 2 for f in fracs) / n)
    s[57] = max(fracs) if fracs else 0.0
    s[58] = sum(1 for f in fracs if f > 0) / n

    s[59:65] = wf.precision_dist
    s[65], s[66] = wf.scalar_vector_ratio

    s[67] = sum(1 for l in pl.tile_load if l > 0) / 4096
    s[68] = avg_hops(cfg.mesh_w, cfg.mesh_h) / (128 / 3)
    s[69] = min(1.0, noc_latency(cfg.mesh_w, cfg.mesh_h,
                                 node.hop_latency, node.setup_latency) / 256)

    s[70] = s[23]
    s[71] = s[24]
    from .arch import kv_compaction
    s[72] = 1.0 / kv_compaction(cfg)
    return s


def subset_state(full: np.ndarray, idx: tuple[int, ...] = SUBSET_IDX) -> np.ndarray:
    return full[list(idx)]


# --- action decoding -----------------------------------------------------------

def project_action(a: ActionVector) -> ActionVector:
    """Nearest in-bounds action: componentwise clamp."""
    cont = np.clip(a.continuous, -1.0, 1.0)
    disc = tuple(int(min(2, max(-2, d))) for d in a.discrete)
    return ActionVector(cont, disc)


def _delta_linear(cur: float, a: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, cur + a * (hi - lo)))


def _quant_int(v: float) -> int:
    return int(round(v))


def _quant_pow2(v: float, lo: int, hi: int) -> int:
    v = min(hi, max(lo, v))
    return min(hi, max(lo, 2 ** round(math.log2(v))))


def _quant_bank(v: float, lo: int, hi: int | None) -> int:
    banks = max(1, round(v / BANK_KB))
    out = max(lo, banks * BANK_KB)
    return min(hi, out) if hi is not None else out


def decode_action(a: ActionVector, cfg: ChipConfig, node: ProcessNode,
                  constraints: Constraints, ctx: EpisodeContext
                  ) -> tuple[ChipConfig, EpisodeContext]:
    """Apply an action to a configuration: mesh deltas, then full-span
    continuous deltas quantized onto the hardware grids."""
    c = a.continuous
    mesh_w = min(MESH_RANGE[1], max(MESH_RANGE[0], cfg.mesh_w + a.discrete[0]))
    mesh_h = min(MESH_RANGE[1], max(MESH_RANGE[0], cfg.mesh_h + a.discrete[1]))
    sc_x = min(8, max(1, cfg.sc_x + a.discrete[2]))
    sc_y = min(8, max(1, cfg.sc_y + a.discrete[3]))

    base = cfg.tiles[0]
    wmem_hi = constraints.wmem_max_kb

    fetch = _quant_int(_delta_linear(base.fetch_size, c[0], *TCC_RANGES["fetch_size"]))
    stanum = _quant_int(_delta_linear(base.stanum, c[1], *TCC_RANGES["stanum"]))
    # VLEN moves in log2 space: +-1 spans the full 128..2048 range
    vexp = math.log2(base.vlen_bits) + c[2] * 4
    vlen = _quant_pow2(2 ** vexp, *TCC_RANGES["vlen_bits"])
    dmem = _quant_bank(_delta_linear(base.dmem_kb, c[3], *TCC_RANGES["dmem_kb"]),
                       *TCC_RANGES["dmem_kb"])
    wmem = _quant_bank(_delta_linear(base.wmem_kb, c[4], 256, wmem_hi), 256, wmem_hi)
    imem = _quant_int(_delta_linear(base.imem_kb, c[5], *TCC_RANGES["imem_kb"]))
    dexp = math.log2(cfg.dflit_bits) + c[6] * 7
    dflit = _quant_pow2(2 ** dexp, *DFLIT_RANGE)
    xr = _quant_int(_delta_linear(base.xr_wp, c[7], *TCC_RANGES["xr_wp"]))
    vr = _quant_int(_delta_linear(base.vr_wp, c[8], *TCC_RANGES["vr_wp"]))
    xdp = _quant_int(_delta_linear(base.xdpnum, c[9], *TCC_RANGES["xdpnum"]))
    vdp = _quant_int(_delta_linear(base.vdpnum, c[10], *TCC_RANGES["vdpnum"]))
    f_clk = _delta_linear(cfg.f_clk, c[11], 0.01 * node.f_clk_max, node.f_clk_max)

    prec_idx = PRECISION_ORDER.index(cfg.precision_mode.value)
    prec_idx = min(5, max(0, prec_idx + round(c[12] * 2)))
    from .graph import Precision
    precision = Precision(PRECISION_ORDER[prec_idx])

    alpha_spec = _delta_linear(cfg.alpha_spec, c[13], 1.0, 2.0)
    kv_window = _delta_linear(cfg.kv_window_ratio, c[14], 0.25, 1.0)

    tile = TccConfig(fetch_size=fetch, stanum=stanum, vlen_bits=vlen,
                     dmem_kb=dmem, wmem_kb=wmem, imem_kb=imem,
                     xr_wp=xr, vr_wp=vr, xdpnum=xdp, vdpnum=vdp)
    new_cfg = replace(cfg, mesh_w=mesh_w, mesh_h=mesh_h, sc_x=sc_x, sc_y=sc_y,
                      tiles=[tile] * (mesh_w * mesh_h), f_clk=f_clk,
                      dflit_bits=dflit, precision_mode=precision,
                      alpha_spec=alpha_spec, kv_window_ratio=kv_window)

    f_in = _delta_linear(ctx.dmem_f_in, c[15], 0.0, 1.0)
    f_out = _delta_linear(ctx.dmem_f_out, c[16], 0.0, 1.0)
    if f_in + f_out > 1.0:
        scale = 1.0 / (f_in + f_out)
        f_in, f_out = f_in * scale, f_out * scale
    new_ctx = EpisodeContext(
        dmem_f_in=f_in, dmem_f_out=f_out,
        rho={
            OpKind.MATMUL: partition_ratio(0.3, c[19]),
            OpKind.CONV: partition_ratio(0.3, c[20]),
            "general": partition_ratio(0.0, max(0.0, c[21])),
        },
        stream_in=_delta_linear(ctx.stream_in, c[22], 0.0, 1.0),
        stream_out=_delta_linear(ctx.stream_out, c[23], 0.0, 1.0),
        prev_ppa=ctx.prev_ppa,
    )
    return new_cfg, new_ctx


# --- reward ---------------------------------------------------------------------

@dataclass(frozen=True)
class RewardParts:
    perf: float
    power: float
    area: float
    feasibility: float
    violation: float
    memory: float
    hazard: float

    @property
    def total(self) -> float:
        return (self.perf - self.power - self.area + self.feasibility
                - self.violation - self.memory - self.hazard)


def reward(perf: float, power_mw: float, area_mm2: float, m_used: float,
           hazard_score: float, constraints: Constraints) -> tuple[float, RewardParts]:
    """Composite reward: weighted normalized PPA terms, feasibility bonus
    with power margin, cubic power-violation penalty, and linear memory and
    hazard penalties."""
    w = constraints.weights
    total_w = sum(w)
    if min(w) < 0 or total_w <= 0:
        raise ValueError("weights must be >= 0 with positive sum")
    alpha, beta, gamma = (x / total_w for x in w)
    rng = constraints.norm_ranges()

    def norm(v, bounds):
        lo, hi = bounds
        return (v - lo) / (hi - lo)

    p_norm = norm(perf, rng.perf)
    pw_norm = norm(power_mw, rng.power)
    a_norm = norm(area_mm2, rng.area)

    feasible = (power_mw <= constraints.p_max_mw
                and area_mm2 <= constraints.a_max_mm2
                and m_used <= constraints.m_budget_bytes)
    if feasible:
        m_pwr = (constraints.p_max_mw - power_mw) / constraints.p_max_mw
        bonus = constraints.s_mag * (1.0 + m_pwr)
    else:
        bonus = 0.0

    if power_mw > constraints.p_max_mw:
        v = (power_mw - constraints.p_max_mw) / constraints.p_max_mw
        violation = constraints.s_mag * (1.0 + v) * v ** 2
    else:
        violation = 0.0

    mem_pen = constraints.lambda_mem * max(
        0.0, (m_used - constraints.m_budget_bytes) / constraints.m_budget_bytes)
    haz_pen = constraints.lambda_hazard * hazard_score

    parts = RewardParts(
        perf=alpha * p_norm, power=beta * pw_norm, area=gamma * a_norm,
        feasibility=bonus, violation=violation, memory=mem_pen, hazard=haz_pen,
    )
    return parts.total, parts


def feasible(power_mw: float, area_mm2: float, m_used: float,
             constraints: Constraints) -> bool:
    return (power_mw <= constraints.p_max_mw
            and area_mm2 <= constraints.a_max_mm2
            and m_used <= constraints.m_budget_bytes)
