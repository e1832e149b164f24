"""Chip configuration types and the closed-form analytical PPA models:
memory hierarchy, NoC, throughput ceilings, power breakdown, area, and the
composite (lower-is-better) score.

All model functions are pure in (config, node, workload, placement) and may
be evaluated concurrently across candidate configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .graph import OperatorGraph, PRECISION_BYTES, Precision, flops_per_token
from .kvcache import KvSpec, adjusted_bytes_per_token, kv_bytes_per_token
from .procnode import F_REF_HZ, ProcessNode, power_scale

KB = 1024
MB = 1024 * 1024
BANK_KB = 16          # DMEM/WMEM bank granularity
TM_FP16_DEFAULT = 64  # tensor multipliers per TCC before VLEN capping

# Table 6 architectural ranges (min, max); WMEM max is adaptive.
TCC_RANGES = {
    "fetch_size": (1, 16),
    "stanum": (1, 32),
    "vlen_bits": (128, 2048),
    "dmem_kb": (16, 512),
    "wmem_kb": (256, None),
    "imem_kb": (1, 128),
    "xr_wp": (1, 16),
    "vr_wp": (1, 16),
    "xdpnum": (1, 16),
    "vdpnum": (1, 16),
}
DFLIT_RANGE = (64, 8192)
MESH_RANGE = (1, 64)


class ConfigError(ValueError):
    pass


class Binding(str, Enum):
    COMPUTE = "Compute"
    MEMORY = "Memory"
    NOC = "NoC"


class KvStrategy(str, Enum):
    FP16 = "fp16"
    INT8 = "int8"
    INT4 = "int4"


KV_QUANT_BITS = {KvStrategy.FP16: 16, KvStrategy.INT8: 8, KvStrategy.INT4: 4}


@dataclass(frozen=True)
class TccConfig:
    fetch_size: int = 4
    stanum: int = 4
    vlen_bits: int = 512
    dmem_kb: int = 64
    wmem_kb: int = 1024
    imem_kb: int = 16
    xr_wp: int = 2
    vr_wp: int = 2
    xdpnum: int = 2
    vdpnum: int = 2

    def validate(self, wmem_max_kb: int | None = None) -> None:
        for name, (lo, hi) in TCC_RANGES.items():
            v = getattr(self, name)
            hi_eff = hi if hi is not None else (wmem_max_kb or v)
            if not (lo <= v <= hi_eff):
                raise ConfigError(f"{name}={v} outside range [{lo}, {hi_eff}]")
        if self.vlen_bits & (self.vlen_bits - 1):
            raise ConfigError(f"vlen_bits={self.vlen_bits} is not a power of two")
        if self.dmem_kb % BANK_KB or self.wmem_kb % BANK_KB:
            raise ConfigError("dmem_kb and wmem_kb must be multiples of the 16 KB bank")


@dataclass
class ChipConfig:
    mesh_w: int
    mesh_h: int
    tiles: list[TccConfig]
    f_clk: float                   # Hz
    dflit_bits: int = 2048
    sc_x: int = 1
    sc_y: int = 1
    precision_mode: Precision = Precision.FP16
    batch: int = 1
    kv_strategy: KvStrategy = KvStrategy.FP16
    kv_window_ratio: float = 1.0   # mean window / sequence length
    alpha_spec: float = 1.0

    @property
    def n_cores(self) -> int:
        return self.mesh_w * self.mesh_h

    @property
    def total_wmem_bytes(self) -> int:
        return sum(t.wmem_kb for t in self.tiles) * KB

    def validate(self, node: ProcessNode | None = None,
                 w_total: int | None = None) -> None:
        if not (MESH_RANGE[0] <= self.mesh_w <= MESH_RANGE[1]
                and MESH_RANGE[0] <= self.mesh_h <= MESH_RANGE[1]):
            raise ConfigError(f"mesh {self.mesh_w}x{self.mesh_h} outside [1, 64]^2")
        if len(self.tiles) != self.n_cores:
            raise ConfigError(f"expected {self.n_cores} tiles, got {len(self.tiles)}")
        if not (DFLIT_RANGE[0] <= self.dflit_bits <= DFLIT_RANGE[1]):
            raise ConfigError(f"dflit_bits={self.dflit_bits} outside {DFLIT_RANGE}")
        if not (1.0 <= self.alpha_spec <= 2.0):
            raise ConfigError(f"alpha_spec={self.alpha_spec} outside [1.0, 2.0]")
        if node is not None and self.f_clk > node.f_clk_max * (1 + 1e-9):
            raise ConfigError(f"f_clk={self.f_clk:.3g} exceeds node max {node.f_clk_max:.3g}")
        wmem_max = max(t.wmem_kb for t in self.tiles)
        for t in self.tiles:
            t.validate(wmem_max_kb=wmem_max)
        if w_total is not None and self.total_wmem_bytes < w_total:
            raise ConfigError(
                f"total WMEM {self.total_wmem_bytes} B < weight footprint {w_total} B")


def uniform_chip(mesh_w: int, mesh_h: int, tile: TccConfig, f_clk: float,
                 **kwargs) -> ChipConfig:
    return ChipConfig(mesh_w=mesh_w, mesh_h=mesh_h,
                      tiles=[tile] * (mesh_w * mesh_h), f_clk=f_clk, **kwargs)


@dataclass(frozen=True)
class PpaEstimate:
    power_mw: float
    power_breakdown: dict
    perf_gops: float
    area_mm2: float
    tok_s: float
    score: float
    feasible: bool
    binding: Binding


# --- memory hierarchy -------------------------------------------------------

def dmem_split(d_total_kb: float, f_in: float, f_out: float) -> tuple[float, float, float]:
    """Split DMEM into (input, output, scratch); scratch absorbs the remainder."""
    if f_in < 0 or f_out < 0 or f_in + f_out > 1 + 1e-12:
        raise ValueError(f"fractions invalid: f_in={f_in}, f_out={f_out}")
    d_in = f_in * d_total_kb
    d_out = f_out * d_total_kb
    return d_in, d_out, d_total_kb - d_in - d_out


def bw_eff(bw_peak: float, volume: float, cycles: float, f_clk: float) -> float:
    """Effective bandwidth: min(peak, volume / elapsed time)."""
    if cycles < 1 or f_clk <= 0:
        raise ValueError("cycles must be >= 1 and f_clk > 0")
    return min(bw_peak, volume / (cycles / f_clk))


def mem_pressure(w_used: float, w_alloc: float, d_used: float, d_alloc: float,
                 lambda_d: float = 0.5) -> float:
    """Tile-level memory pressure: WMEM utilization + 0.5 * DMEM utilization."""
    if w_alloc <= 0 or d_alloc <= 0:
        raise ValueError("allocations must be > 0")
    return w_used / w_alloc + lambda_d * d_used / d_alloc


# --- NoC --------------------------------------------------------------------

def bisection_bw(mesh_w: int, mesh_h: int, dflit_bits: int, f_clk: float) -> float:
    """Aggregate cross-mesh data rate in bits/s: min(M,N) * dflit * f."""
    if mesh_w < 1 or mesh_h < 1:
        raise ValueError("mesh dims must be >= 1")
    return min(mesh_w, mesh_h) * dflit_bits * f_clk


def avg_hops(mesh_w: int, mesh_h: int) -> float:
    """Mean hop count between two tiles: (M + N) / 3."""
    if mesh_w < 1 or mesh_h < 1:
        raise ValueError("mesh dims must be >= 1")
    return (mesh_w + mesh_h) / 3.0


def noc_latency(mesh_w: int, mesh_h: int, hop_lat: float, setup_lat: float) -> float:
    return avg_hops(mesh_w, mesh_h) * hop_lat + setup_lat


# --- throughput ceilings ----------------------------------------------------

def compute_ceiling(cfg: ChipConfig, flops_per_tok: float,
                    eta_par: float = 1.0, tm_fp16: int = TM_FP16_DEFAULT) -> float:
    """Compute-bound tokens/s: per-tile tensor multipliers (VLEN-capped),
    two FLOPs per multiplier per cycle, scaled by parallel efficiency and
    the speculative decoding factor.
    """
    if flops_per_tok <= 0:
        raise ValueError("flops_per_tok must be > 0")
    if not (0 < eta_par <= 1):
        raise ValueError("eta_par must be in (0, 1]")
    flops_s = sum(min(tm_fp16, t.vlen_bits // 16) * 2 * cfg.f_clk for t in cfg.tiles)
    return flops_s * eta_par * cfg.alpha_spec / flops_per_tok


def tile_bw_peak(tile: TccConfig, f_clk: float) -> float:
    # One WMEM and one DMEM port, each VLEN bits wide, per cycle.
    return 2 * (tile.vlen_bits / 8) * f_clk


def memory_ceiling(cfg: ChipConfig, bytes_per_token: float) -> float:
    """Memory-bound tokens/s: aggregate effective tile bandwidth over the
    per-token traffic (weights + KV + activations)."""
    if bytes_per_token <= 0:
        raise ValueError("bytes_per_token must be > 0")
    total_bw = sum(tile_bw_peak(t, cfg.f_clk) for t in cfg.tiles)
    return total_bw / bytes_per_token


def noc_ceiling(cfg: ChipConfig, cross_tile_bytes_per_token: float) -> float:
    """NoC-bound tokens/s; infinite when all traffic is tile-local."""
    if cross_tile_bytes_per_token < 0:
        raise ValueError("cross_tile_bytes_per_token must be >= 0")
    if cross_tile_bytes_per_token == 0:
        return math.inf
    bits_s = bisection_bw(cfg.mesh_w, cfg.mesh_h, cfg.dflit_bits, cfg.f_clk)
    return (bits_s / 8) / cross_tile_bytes_per_token


def kv_spec_for(g: OperatorGraph, cfg: ChipConfig) -> KvSpec:
    meta = g.meta
    hidden = int(meta.get("hidden", 64))
    heads = int(meta.get("heads", 1))
    kv_heads = int(meta.get("kv_heads", heads))
    return KvSpec(
        n_layers=max(1, int(meta.get("layers", 1))),
        n_kv_heads=max(1, kv_heads),
        d_head=max(1, hidden // max(1, heads)),
        elem_bytes=PRECISION_BYTES.get(cfg.precision_mode, 2),
        seq_len=int(meta.get("seq_len", 2048)),
    )


def kv_compaction(cfg: ChipConfig) -> float:
    bits = KV_QUANT_BITS[cfg.kv_strategy]
    window = max(min(cfg.kv_window_ratio, 1.0), 1e-6)
    return (16 / bits) / window


def bytes_per_token(g: OperatorGraph, cfg: ChipConfig) -> float:
    """Per-token memory traffic: full weight read + KV update + activations,
    with KV traffic reduced by the configured compaction factor."""
    spec = kv_spec_for(g, cfg)
    kv_bt = kv_bytes_per_token(spec)
    elem = PRECISION_BYTES.get(cfg.precision_mode, 2)
    act = 2 * int(g.meta.get("hidden", 64)) * int(g.meta.get("layers", 1)) * elem
    raw = g.w_total + kv_bt + act
    return adjusted_bytes_per_token(raw, kv_bt, kv_compaction(cfg))


def throughput(cfg: ChipConfig, g: OperatorGraph,
               cross_tile_bytes_per_tok: float, eta_par: float = 1.0,
               phi_decode: float = 0.97,
               tm_fp16: int = TM_FP16_DEFAULT) -> tuple[float, Binding]:
    """Realized tokens/s = min of the three ceilings; ties resolve in the
    order Compute < Memory < NoC."""
    ceilings = {
        Binding.COMPUTE: compute_ceiling(cfg, flops_per_token(g, phi_decode),
                                         eta_par=eta_par, tm_fp16=tm_fp16),
        Binding.MEMORY: memory_ceiling(cfg, bytes_per_token(g, cfg)),
        Binding.NOC: noc_ceiling(cfg, cross_tile_bytes_per_tok),
    }
    return binding_min(ceilings)


def binding_min(ceilings: dict) -> tuple[float, Binding]:
    order = [Binding.COMPUTE, Binding.MEMORY, Binding.NOC]
    best = min(order, key=lambda b: ceilings[b])
    return ceilings[best], best


# --- power / area / score ---------------------------------------------------

def power_model(cfg: ChipConfig, node: ProcessNode, g: OperatorGraph,
                cross_tile_bytes_per_tok: float = 0.0,
                tok_s: float | None = None) -> dict:
    """Power breakdown in mW: compute logic, SRAM traffic, ROM weight reads,
    NoC transport, and leakage.  ROM static leakage is excluded (sleep
    transistors); leakage applies to compute + SRAM only.
    """
    f_ratio = cfg.f_clk / F_REF_HZ
    kappa = power_scale(node)

    compute = cfg.n_cores * node.p_logic_base * kappa * f_ratio

    sram_mb = sum(t.dmem_kb + t.imem_kb for t in cfg.tiles) / 1024
    sram = sram_mb * node.e_dyn_per_mb * 0.5 * f_ratio

    w_mb = g.w_total / MB
    rom_read = w_mb * node.e_dyn_per_mb * node.activity_alpha * f_ratio

    if tok_s is None:
        tok_s, _ = throughput(cfg, g, cross_tile_bytes_per_tok)
    hops = avg_hops(cfg.mesh_w, cfg.mesh_h)
    # pJ/bit/hop * bits/token * hops * tokens/s -> pJ/s -> mW
    noc = (node.e_noc_pj_per_bit * cross_tile_bytes_per_tok * 8 * hops * tok_s) * 1e-9

    leakage = node.leak_frac * (compute + sram)
    parts = {"compute": compute, "sram": sram, "rom_read": rom_read,
             "noc": noc, "leakage": leakage}
    parts["total"] = compute + sram + rom_read + noc + leakage
    return parts


def area_model(cfg: ChipConfig, node: ProcessNode) -> float:
    """Die area in mm^2: scaled logic + ROM (WMEM) + SRAM (DMEM + IMEM)."""
    logic = cfg.n_cores * node.a_logic_base * node.a_scale
    wmem_mb = sum(t.wmem_kb for t in cfg.tiles) / 1024
    sram_mb = sum(t.dmem_kb + t.imem_kb for t in cfg.tiles) / 1024
    return logic + wmem_mb * node.a_rom_per_mb + sram_mb * node.a_sram_per_mb


def perf_gops(cfg: ChipConfig, eta_util: float = 1.0,
              tm_fp16: int = TM_FP16_DEFAULT) -> float:
    """Raw compute rate in GOps/s (FP16 multiply-accumulate ops)."""
    flops_s = sum(min(tm_fp16, t.vlen_bits // 16) * 2 * cfg.f_clk for t in cfg.tiles)
    return flops_s * eta_util / 1e9


@dataclass(frozen=True)
class NormRanges:
    perf: tuple[float, float]
    power: tuple[float, float]
    area: tuple[float, float]


def _norm(value: float, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    if hi <= lo:
        raise ValueError(f"normalization range invalid: {bounds}")
    return (value - lo) / (hi - lo)


def ppa_score(perf: float, power: float, area: float, ranges: NormRanges,
              weights: tuple[float, float, float] = (0.4, 0.4, 0.2)) -> float:
    """Lower-is-better composite: beta*power_n + gamma*area_n + alpha*(1-perf_n),
    with (alpha, beta, gamma) the weights normalized to sum 1."""
    w_perf, w_power, w_area = weights
    if min(weights) < 0 or sum(weights) <= 0:
        raise ValueError("weights must be >= 0 with positive sum")
    total = w_perf + w_power + w_area
    alpha, beta, gamma = w_perf / total, w_power / total, w_area / total
    return (beta * _norm(power, ranges.power)
            + gamma * _norm(area, ranges.area)
            + alpha * (1.0 - _norm(perf, ranges.perf)))
