"""Process-node parameter table (3-28 nm) and node-dependent scaling factors.

Clock anchors: 1 GHz at 3nm, 820 MHz at 5nm, 250 MHz at 28nm; the remaining
nodes are interpolated log-linearly.  The other columns are a documented
default table, not a calibrated PDK: downstream checks are property-based
(monotonicity, ratios), never absolute-value claims.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

NODE_NMS = (3, 5, 7, 10, 14, 22, 28)

F_REF_HZ = 250e6  # 28nm clock anchor, reference for frequency normalization


@dataclass(frozen=True)
class ProcessNode:
    node_nm: int
    f_clk_max: float        # Hz
    a_scale: float          # logic area relative to 28nm
    v_dd: float             # volts
    e_dyn_per_mb: float     # mJ per MB read
    activity_alpha: float   # memory access activity factor
    a_rom_per_mb: float     # mm^2 / MB
    a_sram_per_mb: float    # mm^2 / MB
    a_logic_base: float     # mm^2 per core (at 28nm scale)
    p_logic_base: float     # mW per core at 28nm, f_ref
    hop_latency: float      # cycles per NoC hop
    setup_latency: float    # cycles of routing overhead
    leak_frac: float = 0.05  # leakage as a fraction of compute+SRAM dynamic power
    e_noc_pj_per_bit: float = 0.05  # pJ per bit per hop


def _interp_log(nm: float, x0: float, y0: float, x1: float, y1: float) -> float:
    t = (math.log(nm) - math.log(x0)) / (math.log(x1) - math.log(x0))
    return math.exp(math.log(y0) + t * (math.log(y1) - math.log(y0)))


def _f_clk_max(nm: float) -> float:
    # Anchors: (3nm, 1 GHz), (5nm, 820 MHz), (28nm, 250 MHz)
    if nm <= 3:
        return 1.0e9
    if nm <= 5:
        return _interp_log(nm, 3, 1.0e9, 5, 820e6)
    return _interp_log(nm, 5, 820e6, 28, 250e6)


# Default columns, indexed in NODE_NMS order.
_A_SCALE = (0.04, 0.08, 0.13, 0.22, 0.36, 0.70, 1.0)
_V_DD = (0.55, 0.60, 0.65, 0.70, 0.75, 0.85, 0.90)
_E_DYN = (0.010, 0.014, 0.018, 0.024, 0.032, 0.048, 0.060)   # mJ/MB
_A_ROM = (0.08, 0.13, 0.19, 0.28, 0.42, 0.75, 1.00)          # mm^2/MB
_A_SRAM = (0.16, 0.26, 0.38, 0.56, 0.84, 1.50, 2.00)         # mm^2/MB
_LEAK = (0.08, 0.07, 0.06, 0.05, 0.04, 0.03, 0.03)
_E_NOC = (0.02, 0.03, 0.04, 0.05, 0.07, 0.10, 0.12)          # pJ/bit/hop


def builtin_table() -> list[ProcessNode]:
    """The 7-node default table, 3nm through 28nm."""
    table = []
    for i, nm in enumerate(NODE_NMS):
        table.append(ProcessNode(
            node_nm=nm,
            f_clk_max=_f_clk_max(nm),
            a_scale=_A_SCALE[i],
            v_dd=_V_DD[i],
            e_dyn_per_mb=_E_DYN[i],
            activity_alpha=0.30,
            a_rom_per_mb=_A_ROM[i],
            a_sram_per_mb=_A_SRAM[i],
            a_logic_base=0.045,
            p_logic_base=1.8,
            hop_latency=2.0,
            setup_latency=8.0,
            leak_frac=_LEAK[i],
            e_noc_pj_per_bit=_E_NOC[i],
        ))
    return table


def node_by_nm(nm: int, table: list[ProcessNode] | None = None) -> ProcessNode:
    table = table if table is not None else builtin_table()
    for n in table:
        if n.node_nm == nm:
            return n
    valid = sorted(n.node_nm for n in table)
    raise KeyError(f"unknown process node {nm} nm; valid nodes: {valid}")


def power_scale(n: ProcessNode) -> float:
    """Node-dependent power scaling factor: sqrt(a_scale) * v_dd^2."""
    return math.sqrt(n.a_scale) * n.v_dd ** 2


def interpolate_node(nm: float, table: list[ProcessNode] | None = None) -> ProcessNode:
    """Log-log interpolate all table columns at an off-grid feature size."""
    table = sorted(table if table is not None else builtin_table(),
                   key=lambda n: n.node_nm)
    if nm <= table[0].node_nm:
        return table[0]
    if nm >= table[-1].node_nm:
        return table[-1]
    for lo, hi in zip(table, table[1:]):
        if lo.node_nm <= nm <= hi.node_nm:
            break
    def col(attr: str) -> float:
        return _interp_log(nm, lo.node_nm, getattr(lo, attr), hi.node_nm, getattr(hi, attr))
    return ProcessNode(
        node_nm=int(round(nm)),
        f_clk_max=col("f_clk_max"), a_scale=col("a_scale"), v_dd=col("v_dd"),
        e_dyn_per_mb=col("e_dyn_per_mb"), activity_alpha=col("activity_alpha"),
        a_rom_per_mb=col("a_rom_per_mb"), a_sram_per_mb=col("a_sram_per_mb"),
        a_logic_base=col("a_logic_base"), p_logic_base=col("p_logic_base"),
        hop_latency=col("hop_latency"), setup_latency=col("setup_latency"),
        leak_frac=col("leak_frac"), e_noc_pj_per_bit=col("e_noc_pj_per_bit"),
    )


CSV_HEADER = ("node_nm,f_clk_max_mhz,a_scale,v_dd,e_dyn_per_mb,activity_alpha,"
              "a_rom_per_mb,a_sram_per_mb,a_logic_base,p_logic_base,"
              "hop_latency,setup_latency")


def load_table(path: str | Path) -> list[ProcessNode]:
    """Load an override table from CSV (see CSV_HEADER for the column layout).

    Columns not present in the file keep their builtin defaults.
    """
    defaults = {n.node_nm: n for n in builtin_table()}
    table = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            nm = int(row["node_nm"])
            base = defaults.get(nm) or interpolate_node(nm)
            table.append(replace(
                base,
                node_nm=nm,
                f_clk_max=float(row["f_clk_max_mhz"]) * 1e6,
                a_scale=float(row["a_scale"]),
                v_dd=float(row["v_dd"]),
                e_dyn_per_mb=float(row["e_dyn_per_mb"]),
                activity_alpha=float(row["activity_alpha"]),
                a_rom_per_mb=float(row["a_rom_per_mb"]),
                a_sram_per_mb=float(row["a_sram_per_mb"]),
                a_logic_base=float(row["a_logic_base"]),
                p_logic_base=float(row["p_logic_base"]),
                hop_latency=float(row["hop_latency"]),
                setup_latency=float(row["setup_latency"]),
            ))
    return sorted(table, key=lambda n: n.node_nm)
