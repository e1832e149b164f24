import math

import pytest
from hypothesis import given, settings, strategies as st

from meshdse.arch import (Binding, ChipConfig, ConfigError, KvStrategy,
                          NormRanges, TccConfig, area_model, avg_hops,
                          binding_min, bisection_bw, bw_eff, bytes_per_token,
                          compute_ceiling, dmem_split, kv_compaction,
                          mem_pressure, memory_ceiling, noc_ceiling,
                          perf_gops, power_model, ppa_score, throughput,
                          uniform_chip)
from meshdse.graph import gen_transformer
from meshdse.procnode import F_REF_HZ, node_by_nm, power_scale


# --- independent oracles ------------------------------------------------------

def oracle_avg_hops(m, n):
    return (m + n) / 3.0


def oracle_bisection(m, n, dflit, f):
    return min(m, n) * dflit * f


def oracle_dmem_split(total, f_in, f_out):
    return total * f_in, total * f_out, total * (1 - f_in - f_out)


def oracle_mem_pressure(w, wa, d, da):
    return w / wa + 0.5 * d / da


def oracle_compute_tokens(tiles, f, eta, alpha, flops_tok, tm=64):
    total = 0.0
    for t in tiles:
        total += min(tm, t.vlen_bits // 16) * 2 * f
    return total * eta * alpha / flops_tok


def toy_graph():
    return gen_transformer(2, 64, 4, 2, 256, 128)


def toy_chip(**kw):
    return uniform_chip(4, 4, TccConfig(), f_clk=1e9, **kw)


class TestOracles:
    @given(st.integers(1, 64), st.integers(1, 64))
    def test_avg_hops(self, m, n):
        assert avg_hops(m, n) == pytest.approx(oracle_avg_hops(m, n), rel=1e-12)

    @given(st.integers(1, 64), st.integers(1, 64),
           st.sampled_from([64, 256, 2048, 8192]), st.floats(1e6, 1e9))
    def test_bisection(self, m, n, dflit, f):
        assert bisection_bw(m, n, dflit, f) == pytest.approx(
            oracle_bisection(m, n, dflit, f), rel=1e-12)

    @given(st.floats(1.0, 1024.0), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
    def test_dmem_split(self, total, f_in, f_out):
        got = dmem_split(total, f_in, f_out)
        want = oracle_dmem_split(total, f_in, f_out)
        for a, b in zip(got, want):
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @given(st.floats(0.0, 100.0), st.floats(1.0, 100.0),
           st.floats(0.0, 100.0), st.floats(1.0, 100.0))
    def test_mem_pressure(self, w, wa, d, da):
        assert mem_pressure(w, wa, d, da) == pytest.approx(
            oracle_mem_pressure(w, wa, d, da), rel=1e-12)

    @given(st.floats(1e3, 1e9), st.floats(0.0, 1e9),
           st.integers(1, 10**6), st.floats(1e6, 1e9))
    def test_bw_eff(self, peak, vol, cycles, f):
        assert bw_eff(peak, vol, cycles, f) == pytest.approx(
            min(peak, vol / (cycles / f)), rel=1e-12)

    def test_compute_ceiling_loop_oracle(self):
        g = toy_graph()
        cfg = toy_chip()
        want = oracle_compute_tokens(cfg.tiles, cfg.f_clk, 0.8, 1.0,
                                     2.0 * g.p_total * 0.97)
        got = compute_ceiling(cfg, 2.0 * g.p_total * 0.97, eta_par=0.8)
        assert got == pytest.approx(want, rel=1e-12)


class TestValidation:
    def test_vlen_power_of_two(self):
        with pytest.raises(ConfigError):
            TccConfig(vlen_bits=300).validate()

    def test_bank_granularity(self):
        with pytest.raises(ConfigError):
            TccConfig(dmem_kb=20).validate()

    def test_range_violation_named(self):
        with pytest.raises(ConfigError) as exc:
            TccConfig(fetch_size=99).validate()
        assert "fetch_size" in str(exc.value)

    def test_chip_tile_count(self):
        cfg = toy_chip()
        cfg.tiles = cfg.tiles[:3]
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_fclk_above_node_max(self):
        cfg = uniform_chip(2, 2, TccConfig(), f_clk=2e9)
        with pytest.raises(ConfigError):
            cfg.validate(node=node_by_nm(3))


class TestThroughput:
    def test_binding_tie_order(self):
        tie = {Binding.COMPUTE: 5.0, Binding.MEMORY: 5.0, Binding.NOC: 5.0}
        assert binding_min(tie) == (5.0, Binding.COMPUTE)
        tie2 = {Binding.COMPUTE: 9.0, Binding.MEMORY: 5.0, Binding.NOC: 5.0}
        assert binding_min(tie2)[1] == Binding.MEMORY

    def test_noc_infinite_when_local(self):
        assert noc_ceiling(toy_chip(), 0.0) == math.inf

    def test_throughput_is_min_of_ceilings(self):
        g = toy_graph()
        cfg = toy_chip()
        cross = 1e4
        tok, binding = throughput(cfg, g, cross, eta_par=0.9)
        ceilings = [
            compute_ceiling(cfg, 2.0 * g.p_total * 0.97, eta_par=0.9),
            memory_ceiling(cfg, bytes_per_token(g, cfg)),
            noc_ceiling(cfg, cross),
        ]
        assert tok == pytest.approx(min(ceilings), rel=1e-12)

    def test_memory_ceiling_drops_with_traffic(self):
        cfg = toy_chip()
        assert memory_ceiling(cfg, 2e6) < memory_ceiling(cfg, 1e6)

    def test_kv_compaction_quant_and_window(self):
        cfg = toy_chip(kv_strategy=KvStrategy.INT8, kv_window_ratio=0.5)
        assert kv_compaction(cfg) == pytest.approx(4.0)
        assert kv_compaction(toy_chip()) == pytest.approx(1.0)


class TestPowerArea:
    def test_breakdown_sums_to_total(self):
        g = toy_graph()
        cfg = toy_chip()
        p = power_model(cfg, node_by_nm(7), g, cross_tile_bytes_per_tok=5e3)
        parts = [p[k] for k in ("compute", "sram", "rom_read", "noc", "leakage")]
        assert p["total"] == pytest.approx(sum(parts), rel=1e-12)
        assert all(v >= 0 for v in parts)

    def test_compute_power_oracle(self):
        g = toy_graph()
        cfg = toy_chip()
        node = node_by_nm(5)
        p = power_model(cfg, node, g)
        want = (cfg.n_cores * node.p_logic_base * power_scale(node)
                * cfg.f_clk / F_REF_HZ)
        assert p["compute"] == pytest.approx(want, rel=1e-12)

    def test_leakage_fraction(self):
        g = toy_graph()
        node = node_by_nm(28)
        p = power_model(toy_chip(), node, g)
        assert p["leakage"] == pytest.approx(
            node.leak_frac * (p["compute"] + p["sram"]), rel=1e-12)

    def test_area_oracle(self):
        cfg = toy_chip()
        node = node_by_nm(14)
        wmem_mb = sum(t.wmem_kb for t in cfg.tiles) / 1024
        sram_mb = sum(t.dmem_kb + t.imem_kb for t in cfg.tiles) / 1024
        want = (cfg.n_cores * node.a_logic_base * node.a_scale
                + wmem_mb * node.a_rom_per_mb + sram_mb * node.a_sram_per_mb)
        assert area_model(cfg, node) == pytest.approx(want, rel=1e-12)

    def test_area_shrinks_with_node(self):
        cfg = toy_chip()
        assert area_model(cfg, node_by_nm(3)) < area_model(cfg, node_by_nm(28))


class TestScore:
    RANGES = NormRanges(perf=(0.0, 100.0), power=(0.0, 50.0), area=(0.0, 10.0))

    def test_perfect_config_scores_zero(self):
        assert ppa_score(100.0, 0.0, 0.0, self.RANGES) == pytest.approx(0.0)

    def test_worst_config_scores_one(self):
        assert ppa_score(0.0, 50.0, 10.0, self.RANGES) == pytest.approx(1.0)

    @given(st.floats(0.0, 100.0), st.floats(0.0, 50.0), st.floats(0.0, 10.0),
           st.floats(0.1, 10.0))
    def test_weight_scale_invariance(self, perf, power, area, c):
        base = ppa_score(perf, power, area, self.RANGES, (0.4, 0.4, 0.2))
        scaled = ppa_score(perf, power, area, self.RANGES,
                           (0.4 * c, 0.4 * c, 0.2 * c))
        assert scaled == pytest.approx(base, rel=1e-9, abs=1e-12)

    def test_higher_perf_lowers_score(self):
        lo = ppa_score(10.0, 25.0, 5.0, self.RANGES)
        hi = ppa_score(90.0, 25.0, 5.0, self.RANGES)
        assert hi < lo

    def test_perf_gops_oracle(self):
        cfg = toy_chip()
        want = sum(min(64, t.vlen_bits // 16) * 2 * cfg.f_clk
                   for t in cfg.tiles) / 1e9
        assert perf_gops(cfg) == pytest.approx(want, rel=1e-12)
