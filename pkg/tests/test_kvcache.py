import math

import pytest
from hypothesis import given, strategies as st

from meshdse.kvcache import (KvSpec, adjusted_bytes_per_token,
                             compaction_factor, kv_bytes_per_token,
                             kv_dmem_check, kv_total, page_count,
                             quant_scale_overhead, windowed_bytes)

LLAMA = KvSpec(n_layers=32, n_kv_heads=8, d_head=128, elem_bytes=2, seq_len=2048)


class TestFootprint:
    def test_per_token_128kb(self):
        assert kv_bytes_per_token(LLAMA) == 131072

    def test_total_256mb_at_2048(self):
        assert kv_total(LLAMA, 2048) == 256 * 1024 * 1024

    def test_zero_length(self):
        assert kv_total(LLAMA, 0) == 0

    def test_quant_overhead_only_when_quantized(self):
        q = KvSpec(n_layers=32, n_kv_heads=8, d_head=128, elem_bytes=1,
                   quant_bits=8)
        assert kv_total(q, 1) == kv_bytes_per_token(q) + quant_scale_overhead(q)
        assert kv_total(LLAMA, 1) == kv_bytes_per_token(LLAMA)

    def test_invalid_quant_bits(self):
        with pytest.raises(ValueError):
            KvSpec(n_layers=1, n_kv_heads=1, d_head=1, elem_bytes=2, quant_bits=5)


class TestCompaction:
    def test_paper_compaction_factor(self):
        assert compaction_factor(16, 8, 2048, 1024) == pytest.approx(4.0)

    def test_compacted_footprint_64mb(self):
        kappa = compaction_factor(16, 8, 2048, 1024)
        assert kv_total(LLAMA, 2048) / kappa == pytest.approx(64 * 1024 * 1024)

    def test_no_compaction_identity(self):
        assert compaction_factor(16, 16, 2048, 2048) == pytest.approx(1.0)

    def test_adjusted_bytes_formula(self):
        # oracle: b - (1 - 1/k) * kv
        assert adjusted_bytes_per_token(1000.0, 400.0, 4.0) == pytest.approx(
            1000.0 - 0.75 * 400.0)

    def test_adjusted_bytes_kappa_below_one_rejected(self):
        with pytest.raises(ValueError):
            adjusted_bytes_per_token(1000.0, 400.0, 0.5)

    @given(st.floats(1.0, 100.0), st.floats(0.0, 500.0))
    def test_adjusted_never_exceeds_raw(self, kappa, kv):
        assert adjusted_bytes_per_token(1000.0, kv, kappa) <= 1000.0 + 1e-9


class TestWindowing:
    def test_windowed_bytes_oracle(self):
        spec = KvSpec(n_layers=3, n_kv_heads=2, d_head=4, elem_bytes=2)
        per_tok = 2 * 2 * 4 * 2
        assert windowed_bytes(spec, 100, [50, 200, 100]) == \
            per_tok * (50 + 100 + 100)

    def test_window_count_mismatch(self):
        spec = KvSpec(n_layers=3, n_kv_heads=2, d_head=4, elem_bytes=2)
        with pytest.raises(ValueError):
            windowed_bytes(spec, 100, [50])


class TestPaging:
    def test_page_count_ceil(self):
        assert page_count(100, 64) == 2
        assert page_count(128, 64) == 2
        assert page_count(1, 64) == 1

    @given(st.integers(0, 10**9), st.integers(1, 10**6))
    def test_page_count_oracle(self, total, page):
        assert page_count(total, page) == math.ceil(total / page)


class TestDmemCheck:
    def test_fits(self):
        spec = KvSpec(n_layers=2, n_kv_heads=2, d_head=4, elem_bytes=2)
        total = kv_total(spec, 16)
        res = kv_dmem_check(spec, 16, 4, [total] * 4, act_input_bytes=0)
        assert res.feasible and res.spill_bytes == 0

    def test_spill_accounted(self):
        spec = KvSpec(n_layers=2, n_kv_heads=2, d_head=4, elem_bytes=2)
        res = kv_dmem_check(spec, 16, 2, [1, 1], act_input_bytes=8)
        assert not res.feasible
        assert res.tiles_short == 2
        share = math.ceil(kv_total(spec, 16) / 2)
        assert res.spill_bytes == 2 * (share + 8 - 1)
