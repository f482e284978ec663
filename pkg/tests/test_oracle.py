import ast
import inspect
from dataclasses import replace

import numpy as np
import pytest

import rollwin as rw
import rollwin.oracle

from conftest import random_tokens


class TestForwardVariants:
    def test_swa_equals_causal_when_window_covers_sequence(self, toy_config, toy_weights):
        tokens = random_tokens(toy_config.window_size, seed=20)
        swa = rw.oracle_forward_swa(toy_weights, toy_config, tokens)
        causal = rw.oracle_forward_causal(toy_weights, toy_config, tokens)
        assert np.array_equal(swa, causal)

    def test_swa_differs_from_causal_on_long_sequences(self, toy_config):
        weights = rw.init_random(toy_config, 42)
        tokens = random_tokens(4 * toy_config.window_size, seed=42)
        swa = rw.oracle_forward_swa(weights, toy_config, tokens)
        causal = rw.oracle_forward_causal(weights, toy_config, tokens)
        # Positions inside the first window agree; later ones must not.
        window = toy_config.window_size
        assert np.array_equal(swa[: window], causal[: window])
        assert float(np.max(np.abs(swa[window:] - causal[window:]))) > 1e-7

    def test_single_token_equals_fresh_engine_step(self, toy_config, toy_weights):
        oracle = rw.oracle_forward_swa(toy_weights, toy_config, [123])
        engine = rw.GenerationSession(toy_weights).forward_decode(123)
        assert np.array_equal(oracle[0], engine)

    def test_causal_position_one_depends_on_token_zero(self, toy_config, toy_weights):
        a = rw.oracle_forward_causal(toy_weights, toy_config, [10, 11])
        b = rw.oracle_forward_causal(toy_weights, toy_config, [12, 11])
        assert float(np.max(np.abs(a[1] - b[1]))) > 1e-7

    def test_logit_shape(self, toy_config, toy_weights):
        out = rw.oracle_forward_swa(toy_weights, toy_config, [1, 2, 3])
        assert out.shape == (3, toy_config.vocab_size)
        assert np.isfinite(out).all()


class TestReachProbe:
    def test_single_layer_window_arithmetic(self):
        config = replace(rw.PRESET_TOY, n_layers=1, window_size=3)
        weights = rw.init_random(config, 3)
        tokens = random_tokens(10, seed=3)
        for j in (0, 2, 5):
            affected = rw.reach_probe(weights, config, tokens, j)
            assert affected == list(range(j, min(j + 2, 9) + 1))

    def test_affected_sets_are_contiguous_from_probe(self, toy_config, toy_weights):
        tokens = random_tokens(16, seed=4)
        for j in (0, 5, 11):
            affected = rw.reach_probe(toy_weights, toy_config, tokens, j)
            assert affected == list(range(j, affected[-1] + 1))

    def test_last_position_probe_affects_only_itself(self, toy_config, toy_weights):
        tokens = random_tokens(10, seed=5)
        assert rw.reach_probe(toy_weights, toy_config, tokens, 9) == [9]

    def test_probe_position_validated(self, toy_config, toy_weights):
        with pytest.raises(ValueError):
            rw.reach_probe(toy_weights, toy_config, [1, 2], 2)

    def test_epsilon_validated(self, toy_config, toy_weights):
        with pytest.raises(ValueError):
            rw.reach_probe(toy_weights, toy_config, [1, 2], 0, epsilon=0.0)


class TestHistoryAccounting:
    def test_one_row_per_layer_per_position(self, toy_config, toy_weights):
        tokens = random_tokens(9, seed=6)
        _, state = rw.run_swa_with_history(toy_weights, toy_config, tokens)
        for layer_rows in state.keys:
            assert len(layer_rows) == len(tokens)
        for layer_rows in state.values:
            assert len(layer_rows) == len(tokens)

    def test_memory_grows_linearly_with_length(self, toy_config, toy_weights):
        counts = {}
        for length in (4, 8, 16):
            _, state = rw.run_swa_with_history(toy_weights, toy_config, random_tokens(length, seed=7))
            counts[length] = state.float_count()
        per_token = counts[4] / 4
        assert counts[8] == 8 * per_token
        assert counts[16] == 16 * per_token

    def test_history_dwarfs_rolling_cache_on_long_runs(self, toy_config, toy_weights):
        length = 8 * toy_config.window_size
        _, state = rw.run_swa_with_history(toy_weights, toy_config, random_tokens(length, seed=8))
        rolling_floats = sum(c.nbytes for c in rw.GenerationSession(toy_weights).caches) // 4
        assert state.float_count() == 8 * rolling_floats


class TestGuards:
    def test_empty_token_list_rejected(self, toy_config, toy_weights):
        with pytest.raises(ValueError, match="non-empty"):
            rw.oracle_forward_swa(toy_weights, toy_config, [])

    def test_context_overflow_rejected(self, toy_config, toy_weights):
        tokens = [0] * (toy_config.context_len + 1)
        with pytest.raises(ValueError, match="context_len"):
            rw.oracle_forward_swa(toy_weights, toy_config, tokens)

    def test_refuses_above_desk_scale(self):
        fat = rw.ModelConfig(
            dim=2048, n_layers=1, head_dim=128, hidden_dim=4,
            n_heads=16, n_kv_heads=16, window_size=8, context_len=1024, vocab_size=4,
        )
        weights = rw.init_random(fat, 0)
        with pytest.raises(ValueError, match="refusing oracle run"):
            rw.oracle_forward_swa(weights, fat, [0] * 513)

    def test_invalid_token_id_rejected(self, toy_config, toy_weights):
        with pytest.raises(ValueError, match="vocabulary"):
            rw.oracle_forward_swa(toy_weights, toy_config, [99999])


class TestIndependence:
    def test_oracle_module_never_imports_the_cache(self):
        # The equivalence tests are only meaningful while the oracle stays
        # structurally independent of the rolling cache implementation.
        tree = ast.parse(inspect.getsource(rollwin.oracle))
        imported = set()
        for node in ast.walk(tree):
            if isinstance(node, ast.Import):
                imported.update(alias.name for alias in node.names)
            elif isinstance(node, ast.ImportFrom):
                module = node.module or ""
                imported.add(module)
                imported.update(f"{module}.{alias.name}" if module else alias.name for alias in node.names)
        assert not any("cache" in name for name in imported)
        assert not any("model" in name for name in imported)
