"""KV-cache footprint, compaction (quantization / sliding window / paging),
and the resulting memory-traffic adjustment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SCALE_BYTES = 4  # FP32 per-head quantization scale (one each for K and V)


@dataclass(frozen=True)
class KvSpec:
    n_layers: int
    n_kv_heads: int
    d_head: int
    elem_bytes: int
    seq_len: int = 2048
    quant_bits: int = 16
    window: int | None = None
    page_bytes: int | None = None

    def __post_init__(self):
        for name in ("n_layers", "n_kv_heads", "d_head", "elem_bytes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.quant_bits not in (16, 8, 4):
            raise ValueError(f"quant_bits must be 16, 8, or 4, got {self.quant_bits}")


def kv_bytes_per_token(spec: KvSpec) -> int:
    """Per-token K+V footprint: 2 * layers * kv_heads * d_head * elem_bytes."""
    return 2 * spec.n_layers * spec.n_kv_heads * spec.d_head * spec.elem_bytes


def quant_scale_overhead(spec: KvSpec) -> int:
    # Per-head K and V scale factors; the formulas above ignore this, we
    # account for it once per cache.
    return spec.n_layers * spec.n_kv_heads * 2 * SCALE_BYTES


def kv_total(spec: KvSpec, seq_len: int | None = None) -> int:
    """Total KV footprint at sequence length L (scale overhead excluded for L=0)."""
    length = spec.seq_len if seq_len is None else seq_len
    if length < 0:
        raise ValueError("sequence length must be >= 0")
    if length == 0:
        return 0
    base = length * kv_bytes_per_token(spec)
    if spec.quant_bits < 16:
        base += quant_scale_overhead(spec)
    return base


def windowed_bytes(spec: KvSpec, seq_len: int, windows_per_layer: list[int]) -> int:
    """Sliding-window footprint: sum over layers of min(L, W_l) tokens."""
    if len(windows_per_layer) != spec.n_layers:
        raise ValueError("one window per layer required")
    per_layer_tok = 2 * spec.n_kv_heads * spec.d_head * spec.elem_bytes
    return sum(min(seq_len, w) * per_layer_tok for w in windows_per_layer)


def page_count(total_bytes: int, page_bytes: int) -> int:
    if page_bytes < 1:
        raise ValueError("page_bytes must be >= 1")
    return math.ceil(total_bytes / page_bytes)


def compaction_factor(b_orig: int, b_quant: int, seq_len: int, mean_window: float) -> float:
    """Combined quantization + windowing compaction: (b_orig/b_quant)*(L/W)."""
    if b_quant < 1 or mean_window <= 0:
        raise ValueError("b_quant and mean_window must be positive")
    return (b_orig / b_quant) * (seq_len / mean_window)


def adjusted_bytes_per_token(bytes_per_token: float, kv_bt: float, kappa: float) -> float:
    """Memory-ceiling traffic after compaction: b_tok - (1 - 1/kappa) * kv_bt."""
    if kappa < 1:
        raise ValueError(f"compaction factor must be >= 1, got {kappa}")
    return bytes_per_token - (1.0 - 1.0 / kappa) * kv_bt


@dataclass(frozen=True)
class KvFeasibility:
    feasible: bool
    spill_bytes: int
    per_tile_required: int
    tiles_short: int


def kv_dmem_check(spec: KvSpec, seq_len: int, n_active: int,
                  dmem_in_bytes: list[int], act_input_bytes: int) -> KvFeasibility:
    """Check that each active tile's DMEM input slice can hold its KV share
    plus activation input; violations are flagged as spill-to-WMEM bytes.
    """
    if n_active < 1:
        raise ValueError("n_active must be >= 1")
    share = math.ceil(kv_total(spec, seq_len) / n_active)
    required = share + act_input_bytes
    spill = 0
    short = 0
    for dmem_in in dmem_in_bytes[:n_active]:
        if dmem_in < required:
            spill += required - dmem_in
            short += 1
    return KvFeasibility(
        feasible=spill == 0, spill_bytes=spill,
        per_tile_required=required, tiles_short=short,
    )
