import json

import pytest

from meshdse.graph import (GraphCycleError, GraphValidationError, OpKind,
                           OperatorGraph, OperatorNode, Precision,
                           analytic_param_count, comm_ratio, flops_per_token,
                           gen_transformer, load_graph, save_graph,
                           workload_features)


def brute_param_count(g: OperatorGraph) -> int:
    """Oracle: parameters = weight bytes / element size, summed per node."""
    elem = 2  # FP16 graphs only in these tests
    return sum(n.weight_bytes for n in g.nodes) // elem


def make_chain(n=3, kind=OpKind.OTHER):
    nodes = [OperatorNode(id=i, kind=kind, flops=10, weight_bytes=0,
                          input_bytes=4, output_bytes=4) for i in range(n)]
    edges = [(i, i + 1, 4) for i in range(n - 1)]
    return OperatorGraph(nodes=nodes, edges=edges)


class TestTopology:
    def test_topological_order_chain(self):
        g = make_chain(5)
        assert g.topological_order() == [0, 1, 2, 3, 4]

    def test_cycle_detected_with_edge(self):
        g = make_chain(3)
        g.edges.append((2, 0, 4))
        with pytest.raises(GraphCycleError) as exc:
            g.topological_order()
        src, dst = exc.value.edge
        assert (src, dst) in {(0, 1), (1, 2), (2, 0)}

    def test_negative_bytes_rejected(self):
        with pytest.raises(GraphValidationError):
            OperatorNode(id=0, kind=OpKind.OTHER, flops=-1, weight_bytes=0,
                         input_bytes=0, output_bytes=0)

    def test_duplicate_ids_rejected(self):
        g = make_chain(2)
        g.nodes.append(g.nodes[0])
        with pytest.raises(GraphValidationError):
            g.validate()


class TestGenTransformer:
    def test_param_count_matches_weight_bytes(self):
        g = gen_transformer(2, 64, 4, 2, 256, 128)
        assert g.p_total == brute_param_count(g)

    def test_analytic_count_closed_form(self):
        # independent arithmetic for 2 layers, hidden 64, kv_dim 32, inter 171
        inter = round(64 * 8 / 3)
        per_layer = 2 * 64 * 64 + 2 * 64 * 32 + 3 * 64 * inter + 2 * 64
        expected = 2 * per_layer + 2 * 256 * 64 + 64
        assert analytic_param_count(2, 64, 4, 2, 256) == expected

    def test_llama_scale_parameters(self):
        # 32 layers, hidden 4096, 32 heads, 8 kv heads, vocab 128256,
        # SwiGLU intermediate 14336: ~8.03e9 parameters
        p = analytic_param_count(32, 4096, 32, 8, 128256, intermediate=14336)
        assert abs(p - 8.03e9) / 8.03e9 < 0.01

    def test_structure_counts(self):
        g = gen_transformer(3, 64, 4, 2, 256, 128)
        # embed + 11 per layer + final norm + unembed
        assert len(g.nodes) == 2 + 3 * 11 + 1
        assert g.topological_order()[0] == 0

    def test_invalid_shapes_rejected(self):
        with pytest.raises(GraphValidationError):
            gen_transformer(2, 65, 4, 2, 256, 128)  # hidden % heads != 0
        with pytest.raises(GraphValidationError):
            gen_transformer(2, 64, 4, 3, 256, 128)  # heads % kv_heads != 0
        with pytest.raises(GraphValidationError):
            gen_transformer(0, 64, 4, 2, 256, 128)


class TestDerivedQuantities:
    def test_flops_per_token(self):
        g = gen_transformer(2, 64, 4, 2, 256, 128)
        assert flops_per_token(g, 1.0) == 2.0 * g.p_total
        assert flops_per_token(g, 0.5) == g.p_total
        with pytest.raises(ValueError):
            flops_per_token(g, 0.0)

    def test_comm_ratio_oracle(self):
        g = make_chain(4)
        # 3 edges x 4 bytes over 40 FLOPs
        assert comm_ratio(g) == pytest.approx(12 / 40)

    def test_workload_features_ranges(self):
        g = gen_transformer(2, 64, 4, 2, 256, 128)
        wf = workload_features(g)
        assert 0 <= wf.ilp <= 1
        assert 0 <= wf.memory_intensity <= 1
        assert 0 < wf.matmul_ratio <= 1
        assert sum(wf.precision_dist) == pytest.approx(1.0)
        assert wf.precision_dist[1] == pytest.approx(1.0)  # FP16-only
        scalar, vector = wf.scalar_vector_ratio
        assert scalar + vector == pytest.approx(1.0)

    def test_matmul_ratio_exact(self):
        g = gen_transformer(2, 64, 4, 2, 256, 128)
        wf = workload_features(g)
        matmul = sum(n.flops for n in g.nodes if n.kind == OpKind.MATMUL)
        assert wf.matmul_ratio == pytest.approx(matmul / g.total_flops)


class TestSerialization:
    def test_round_trip_identical(self, tmp_path):
        g = gen_transformer(2, 64, 4, 2, 256, 128)
        p = tmp_path / "g.json"
        save_graph(g, p)
        g2 = load_graph(p)
        assert g2.nodes == g.nodes
        assert g2.edges == g.edges
        assert g2.p_total == g.p_total
        # canonical: second save is byte-identical
        p2 = tmp_path / "g2.json"
        save_graph(g2, p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_graph(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(GraphValidationError):
            load_graph(p)

    def test_missing_field(self, tmp_path):
        p = tmp_path / "missing.json"
        p.write_text(json.dumps({"nodes": [{"id": 0}], "edges": []}))
        with pytest.raises(GraphValidationError):
            load_graph(p)
