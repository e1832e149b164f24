"""Operator graphs: workload representation, synthetic transformer generator,
and feature extraction feeding the RL state.

Graphs are plain value objects.  All byte/FLOP counts are exact integers so
serialization round-trips bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class OpKind(str, Enum):
    MATMUL = "MatMul"
    CONV = "Conv"
    ATTENTION = "Attention"
    ELEMENTWISE = "Elementwise"
    SOFTMAX = "Softmax"
    NORM = "Norm"
    EMBED = "Embed"
    OTHER = "Other"


class Precision(str, Enum):
    FP32 = "FP32"
    FP16 = "FP16"
    BF16 = "BF16"
    FP8 = "FP8"
    INT8 = "INT8"
    MIXED = "Mixed"


PRECISION_BYTES = {
    Precision.FP32: 4,
    Precision.FP16: 2,
    Precision.BF16: 2,
    Precision.FP8: 1,
    Precision.INT8: 1,
    Precision.MIXED: 2,
}

# Kinds whose FLOPs map onto the vector datapath.
VECTORIZABLE_KINDS = {OpKind.MATMUL, OpKind.CONV, OpKind.ELEMENTWISE}


class GraphValidationError(ValueError):
    pass


class GraphCycleError(GraphValidationError):
    def __init__(self, edge: tuple[int, int]):
        self.edge = edge
        super().__init__(f"graph contains a cycle through edge {edge[0]} -> {edge[1]}")


@dataclass(frozen=True)
class OperatorNode:
    id: int
    kind: OpKind
    flops: int
    weight_bytes: int
    input_bytes: int
    output_bytes: int
    precision: Precision = Precision.FP16

    def __post_init__(self):
        for name in ("flops", "weight_bytes", "input_bytes", "output_bytes"):
            v = getattr(self, name)
            if v < 0:
                raise GraphValidationError(f"node {self.id}: {name} must be >= 0, got {v}")


@dataclass
class OperatorGraph:
    nodes: list[OperatorNode] = field(default_factory=list)
    # (producer id, consumer id, tensor bytes)
    edges: list[tuple[int, int, int]] = field(default_factory=list)
    p_total: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def w_total(self) -> int:
        return sum(n.weight_bytes for n in self.nodes)

    @property
    def total_flops(self) -> int:
        return sum(n.flops for n in self.nodes)

    def node_by_id(self, nid: int) -> OperatorNode:
        return self._index()[nid]

    def _index(self) -> dict[int, OperatorNode]:
        return {n.id: n for n in self.nodes}

    def validate(self) -> None:
        idx = self._index()
        if len(idx) != len(self.nodes):
            raise GraphValidationError("duplicate node ids")
        for src, dst, nbytes in self.edges:
            if src not in idx or dst not in idx:
                raise GraphValidationError(f"edge ({src},{dst}) references unknown node")
            if nbytes < 0:
                raise GraphValidationError(f"edge ({src},{dst}) has negative byte count")
        self.topological_order()

    def topological_order(self) -> list[int]:
        """Kahn's algorithm; raises GraphCycleError naming one cycle edge."""
        indeg = {n.id: 0 for n in self.nodes}
        succ: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for src, dst, _ in self.edges:
            indeg[dst] += 1
            succ[src].append(dst)
        ready = sorted(nid for nid, d in indeg.items() if d == 0)
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for nxt in succ[nid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(self.nodes):
            stuck = [nid for nid, d in indeg.items() if d > 0]
            for src, dst, _ in self.edges:
                if src in stuck and dst in stuck:
                    raise GraphCycleError((src, dst))
            raise GraphCycleError((stuck[0], stuck[0]))
        return order


@dataclass(frozen=True)
class WorkloadFeatures:
    instruction_count: float
    ilp: float
    memory_intensity: float
    vector_util: float
    matmul_ratio: float
    precision_dist: tuple[float, ...]  # FP32, FP16, BF16, FP8, INT8, Mixed
    scalar_vector_ratio: tuple[float, float]


def _llama_intermediate(hidden: int) -> int:
    # SwiGLU sizing: 8/3 * hidden, rounded to nearest integer.
    return round(hidden * 8 / 3)


def gen_transformer(
    layers: int,
    hidden: int,
    heads: int,
    kv_heads: int,
    vocab: int,
    seq_len: int,
    precision: Precision = Precision.FP16,
    intermediate: int | None = None,
) -> OperatorGraph:
    """Build a synthetic decoder-only transformer operator graph.

    Per layer: input norm, Q/K/V/O projections, attention, post norm, and a
    gated MLP (gate/up/down).  Plus embed, final norm, and unembed.  Weight
    bytes are elem_size * parameter count; edge tensors carry full-sequence
    activations.
    """
    for name, v in [("layers", layers), ("hidden", hidden), ("heads", heads),
                    ("kv_heads", kv_heads), ("vocab", vocab), ("seq_len", seq_len)]:
        if v < 1:
            raise GraphValidationError(f"{name} must be >= 1, got {v}")
    if hidden % heads != 0:
        raise GraphValidationError(f"hidden ({hidden}) must be divisible by heads ({heads})")
    if heads % kv_heads != 0:
        raise GraphValidationError(f"heads ({heads}) must be divisible by kv_heads ({kv_heads})")

    eb = PRECISION_BYTES[precision]
    d_head = hidden // heads
    kv_dim = d_head * kv_heads
    inter = intermediate if intermediate is not None else _llama_intermediate(hidden)

    nodes: list[OperatorNode] = []
    edges: list[tuple[int, int, int]] = []
    next_id = 0

    def add(kind: OpKind, params: int, flops: int, in_bytes: int, out_bytes: int) -> int:
        nonlocal next_id
        nodes.append(OperatorNode(
            id=next_id, kind=kind, flops=flops, weight_bytes=params * eb,
            input_bytes=in_bytes, output_bytes=out_bytes, precision=precision))
        next_id += 1
        return next_id - 1

    def connect(src: int, dst: int, nbytes: int) -> None:
        edges.append((src, dst, nbytes))

    act = seq_len * hidden * eb  # full-sequence residual-stream tensor

    embed = add(OpKind.EMBED, vocab * hidden, seq_len * hidden, seq_len * 4, act)
    prev = embed

    for _ in range(layers):
        norm1 = add(OpKind.NORM, hidden, 5 * seq_len * hidden, act, act)
        connect(prev, norm1, act)

        q = add(OpKind.MATMUL, hidden * hidden, 2 * seq_len * hidden * hidden, act, act)
        k = add(OpKind.MATMUL, hidden * kv_dim, 2 * seq_len * hidden * kv_dim,
                act, seq_len * kv_dim * eb)
        v = add(OpKind.MATMUL, hidden * kv_dim, 2 * seq_len * hidden * kv_dim,
                act, seq_len * kv_dim * eb)
        for proj in (q, k, v):
            connect(norm1, proj, act)

        attn_flops = 2 * 2 * seq_len * seq_len * hidden  # QK^T + AV
        attn = add(OpKind.ATTENTION, 0, attn_flops,
                   act + 2 * seq_len * kv_dim * eb, act)
        connect(q, attn, act)
        connect(k, attn, seq_len * kv_dim * eb)
        connect(v, attn, seq_len * kv_dim * eb)

        o = add(OpKind.MATMUL, hidden * hidden, 2 * seq_len * hidden * hidden, act, act)
        connect(attn, o, act)

        norm2 = add(OpKind.NORM, hidden, 5 * seq_len * hidden, act, act)
        connect(o, norm2, act)

        inter_act = seq_len * inter * eb
        gate = add(OpKind.MATMUL, hidden * inter, 2 * seq_len * hidden * inter, act, inter_act)
        up = add(OpKind.MATMUL, hidden * inter, 2 * seq_len * hidden * inter, act, inter_act)
        connect(norm2, gate, act)
        connect(norm2, up, act)
        mul = add(OpKind.ELEMENTWISE, 0, 2 * seq_len * inter, 2 * inter_act, inter_act)
        connect(gate, mul, inter_act)
        connect(up, mul, inter_act)
        down = add(OpKind.MATMUL, inter * hidden, 2 * seq_len * inter * hidden, inter_act, act)
        connect(mul, down, inter_act)
        prev = down

    fnorm = add(OpKind.NORM, hidden, 5 * seq_len * hidden, act, act)
    connect(prev, fnorm, act)
    unembed = add(OpKind.MATMUL, hidden * vocab, 2 * seq_len * hidden * vocab,
                  act, seq_len * vocab * eb)
    connect(fnorm, unembed, act)

    g = OperatorGraph(
        nodes=nodes, edges=edges,
        p_total=analytic_param_count(layers, hidden, heads, kv_heads, vocab, inter),
        meta={
            "layers": layers, "hidden": hidden, "heads": heads, "kv_heads": kv_heads,
            "vocab": vocab, "seq_len": seq_len, "precision": precision.value,
            "intermediate": inter,
        },
    )
    g.validate()
    assert g.p_total * eb == g.w_total
    return g


def analytic_param_count(layers: int, hidden: int, heads: int, kv_heads: int,
                         vocab: int, intermediate: int | None = None) -> int:
    """Closed-form parameter count for the gen_transformer topology."""
    d_head = hidden // heads
    kv_dim = d_head * kv_heads
    inter = intermediate if intermediate is not None else _llama_intermediate(hidden)
    per_layer = (
        2 * hidden * hidden          # Q, O
        + 2 * hidden * kv_dim        # K, V
        + 3 * hidden * inter         # gate, up, down
        + 2 * hidden                 # two norms
    )
    return layers * per_layer + 2 * vocab * hidden + hidden


def flops_per_token(g: OperatorGraph, phi_decode: float) -> float:
    """Decode-time FLOPs per generated token: 2 * P_total * phi_decode."""
    if not (0 < phi_decode <= 1):
        raise ValueError(f"phi_decode must be in (0, 1], got {phi_decode}")
    return 2.0 * g.p_total * phi_decode


def comm_ratio(g: OperatorGraph) -> float:
    """Cross-operator communication-to-computation ratio (bytes per FLOP)."""
    total_flops = g.total_flops
    if total_flops <= 0:
        return 0.0
    return sum(e[2] for e in g.edges) / total_flops


def _critical_path_len(g: OperatorGraph) -> int:
    order = g.topological_order()
    depth = {nid: 1 for nid in order}
    succ: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for src, dst, _ in g.edges:
        succ[src].append(dst)
    for nid in order:
        for nxt in succ[nid]:
            depth[nxt] = max(depth[nxt], depth[nid] + 1)
    return max(depth.values()) if depth else 0


def workload_features(g: OperatorGraph) -> WorkloadFeatures:
    """Extract the workload block of the RL state from an operator graph.

    matmul_ratio and the precision distribution are exact FLOP/node shares;
    ILP, vector_util, memory_intensity, and instruction_count are fixed
    heuristics (see module docs): ILP = 1 - critical_path/num_nodes,
    memory intensity = bytes/FLOP clipped to [0, 4] / 4.
    """
    total_flops = g.total_flops
    n = len(g.nodes)
    if total_flops <= 0 or n == 0:
        return WorkloadFeatures(0.0, 0.0, 0.0, 0.0, 0.0,
                                (0.0,) * 6, (0.0, 0.0))

    matmul_flops = sum(nd.flops for nd in g.nodes if nd.kind == OpKind.MATMUL)
    vec_flops = sum(nd.flops for nd in g.nodes if nd.kind in VECTORIZABLE_KINDS)
    total_bytes = sum(nd.input_bytes + nd.output_bytes + nd.weight_bytes for nd in g.nodes)

    mem_intensity = min(total_bytes / total_flops, 4.0) / 4.0
    ilp = max(0.0, 1.0 - _critical_path_len(g) / n)

    order = [Precision.FP32, Precision.FP16, Precision.BF16,
             Precision.FP8, Precision.INT8, Precision.MIXED]
    prec = tuple(
        sum(nd.flops for nd in g.nodes if nd.precision == p) / total_flops
        for p in order
    )

    vector_util = vec_flops / total_flops
    scalar = 1.0 - vector_util
    return WorkloadFeatures(
        instruction_count=total_flops / 128.0,  # monotone proxy, 2 * 64-wide issue
        ilp=ilp,
        memory_intensity=mem_intensity,
        vector_util=vector_util,
        matmul_ratio=matmul_flops / total_flops,
        precision_dist=prec,
        scalar_vector_ratio=(scalar, vector_util),
    )


def to_json_dict(g: OperatorGraph) -> dict:
    return {
        "nodes": [
            {
                "id": n.id, "kind": n.kind.value, "flops": n.flops,
                "weight_bytes": n.weight_bytes, "input_bytes": n.input_bytes,
                "output_bytes": n.output_bytes, "precision": n.precision.value,
            }
            for n in g.nodes
        ],
        "edges": [[src, dst, nbytes] for src, dst, nbytes in g.edges],
        "meta": {"p_total": g.p_total, "w_total": g.w_total, **g.meta},
    }


def save_graph(g: OperatorGraph, path: str | Path) -> None:
    """Canonical serialization: keys sorted, integers exact."""
    Path(path).write_text(json.dumps(to_json_dict(g), sort_keys=True, indent=1) + "\n")


def load_graph(path: str | Path) -> OperatorGraph:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise GraphValidationError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    try:
        nodes = [
            OperatorNode(
                id=int(nd["id"]), kind=OpKind(nd["kind"]), flops=int(nd["flops"]),
                weight_bytes=int(nd["weight_bytes"]), input_bytes=int(nd["input_bytes"]),
                output_bytes=int(nd["output_bytes"]), precision=Precision(nd["precision"]),
            )
            for nd in raw["nodes"]
        ]
        edges = [(int(e[0]), int(e[1]), int(e[2])) for e in raw["edges"]]
        meta = dict(raw.get("meta", {}))
    except (KeyError, TypeError) as e:
        raise GraphValidationError(f"{path}: missing or malformed field: {e}") from e
    p_total = int(meta.pop("p_total", 0))
    meta.pop("w_total", None)
    g = OperatorGraph(nodes=nodes, edges=edges, p_total=p_total, meta=meta)
    g.validate()
    return g
