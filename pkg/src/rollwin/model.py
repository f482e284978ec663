"""Decoder stack over rolling caches: single-step decode, chunked prompt
prefill, and the autoregressive generation loop.

Weights are shared and immutable; a GenerationSession owns the mutable state
(one rolling cache per layer plus the next absolute position) for exactly
one sequence. Layer arithmetic: rms-norm, grouped-query attention with
rotary positions under the sliding-window mask, then a gated feed-forward,
each with a residual connection.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import attention, tensor
from .attention import HeadGrouping
from .cache import RollingKvCache, new_cache
from .config import ModelConfig
from .tensor import Tensor
from .weights import DecoderWeights, LayerWeights


@dataclass(frozen=True)
class SamplerSpec:
    """How to turn a logit row into the next token.

    Greedy mode ignores k, temperature, and seed; top-k renormalizes the k
    best logits at the given temperature and draws from a seeded generator.
    """

    mode: str = "greedy"  # "greedy" | "top-k"
    k: int = 1
    temperature: float = 1.0
    seed: int = 0


@dataclass
class GenerationResult:
    """Continuation tokens plus the run's accounting."""

    tokens: list[int]
    prompt_len: int
    seq_len: int             # positions actually pushed through attention
    wall_time: float
    truncated: bool
    cache_bytes_per_layer: int
    total_cache_bytes: int
    swa_score_pairs: int
    full_score_pairs: int


def chunk_prompt(prompt_len: int, window: int) -> list[tuple[int, int]]:
    """Split [0, prompt_len) into consecutive window-sized half-open ranges.

    The last range may be shorter; together they cover the prompt exactly.
    """
    if prompt_len < 1:
        raise ValueError(f"prompt_len must be >= 1, got {prompt_len}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return [(start, min(start + window, prompt_len)) for start in range(0, prompt_len, window)]


def _check_sampler(sampler: SamplerSpec, vocab_size: int) -> None:
    if sampler.mode not in ("greedy", "top-k"):
        raise ValueError(f"unknown sampler mode: {sampler.mode!r}")
    if sampler.mode == "top-k":
        if not (1 <= sampler.k <= vocab_size):
            raise ValueError(f"top-k k={sampler.k} outside [1, {vocab_size}]")
        if sampler.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {sampler.temperature}")


def sample_token(logits: Tensor, sampler: SamplerSpec, rng: np.random.Generator) -> int:
    """Greedy argmax (ties to the lowest id) or a temperature-scaled top-k draw."""
    if sampler.mode == "greedy":
        return int(np.argmax(logits))
    # Stable descending sort breaks logit ties toward the lower token id,
    # which keeps k=1 identical to greedy.
    order = np.argsort(-logits, kind="stable")[: sampler.k]
    scaled = logits[order].astype(np.float64) / sampler.temperature
    scaled -= scaled.max()
    probs = np.exp(scaled)
    probs /= probs.sum()
    return int(rng.choice(order, p=probs))


class GenerationSession:
    """Mutable decode state for one sequence over shared immutable weights."""

    def __init__(self, weights: DecoderWeights):
        self.weights = weights
        self.config = weights.config
        self.grouping = HeadGrouping(self.config.n_heads, self.config.n_kv_heads)
        self.caches: list[RollingKvCache] = [
            new_cache(self.config) for _ in range(self.config.n_layers)
        ]
        self.next_position = 0

    @property
    def cache_bytes_per_layer(self) -> int:
        return self.caches[0].nbytes

    @property
    def total_cache_bytes(self) -> int:
        return sum(c.nbytes for c in self.caches)

    def _check_token(self, token_id: int) -> int:
        token_id = int(token_id)
        if not 0 <= token_id < self.config.vocab_size:
            raise ValueError(
                f"token id {token_id} outside vocabulary of size {self.config.vocab_size}"
            )
        return token_id

    def _gathered_window(self, cache: RollingKvCache) -> tuple[list[int], Tensor, Tensor]:
        view = cache.window_view()
        positions = [p for p, _, _ in view]
        keys = np.stack([k_row for _, k_row, _ in view], axis=1)    # [n_kv, n_k, head_dim]
        values = np.stack([v_row for _, _, v_row in view], axis=1)
        return positions, keys, values

    def _ffn(self, x: Tensor, layer: LayerWeights) -> Tensor:
        h = tensor.rms_norm(x, layer.ffn_norm_gain)
        gated = tensor.silu_gate(tensor.matmul(h, layer.W1), tensor.matmul(h, layer.W3))
        return x + tensor.matmul(gated, layer.W2)

    def _logits(self, x_row: Tensor) -> Tensor:
        h = tensor.rms_norm(x_row, self.weights.final_norm_gain)
        return tensor.matmul(h, self.weights.output_proj)[0]

    def forward_decode(self, token_id: int) -> Tensor:
        """Decode one token at the current position, returning its logit row.

        The token's K/V rows are rotated and written to each layer's cache
        before attending, so the query sees a window that includes itself.
        """
        cfg = self.config
        if self.next_position >= cfg.context_len:
            raise ValueError(f"position overflow: context_len {cfg.context_len} reached")
        token_id = self._check_token(token_id)
        pos = self.next_position
        x = self.weights.token_embedding[token_id][np.newaxis, :]  # [1, dim]
        for layer, cache in zip(self.weights.layers, self.caches):
            h = tensor.rms_norm(x, layer.attn_norm_gain)
            q = tensor.matmul(h, layer.Wq).reshape(cfg.n_heads, cfg.head_dim)[:, np.newaxis, :]
            k_row = tensor.matmul(h, layer.Wk).reshape(cfg.n_kv_heads, cfg.head_dim)
            v_row = tensor.matmul(h, layer.Wv).reshape(cfg.n_kv_heads, cfg.head_dim)
            q = tensor.rope_apply(q, pos)
            k_row = tensor.rope_apply(k_row, pos)
            cache.append(pos, k_row, v_row)
            positions, keys, values = self._gathered_window(cache)
            mask = attention.build_swa_mask([pos], positions, cfg.window_size)
            ctx = attention.gqa_attend(q, keys, values, mask, self.grouping)
            merged = ctx.transpose(1, 0, 2).reshape(1, cfg.n_heads * cfg.head_dim)
            x = x + tensor.matmul(merged, layer.Wo)
            x = self._ffn(x, layer)
        logits = self._logits(x)
        self.next_position = pos + 1
        return logits

    def prefill(self, prompt) -> Tensor:
        """Process a whole prompt in window-sized chunks on a fresh session.

        Per chunk and layer: attend the rolling cache plus the chunk itself
        under the combined mask, then bulk-write the chunk's K/V rows. The
        resulting session state matches token-by-token decoding, and the
        returned logits are those of the last prompt position.
        """
        cfg = self.config
        if self.next_position != 0:
            raise ValueError("prefill requires a fresh session (next_position 0)")
        prompt = [self._check_token(t) for t in prompt]
        if not prompt:
            raise ValueError("prompt must be non-empty")
        if len(prompt) > cfg.context_len:
            raise ValueError(f"prompt length {len(prompt)} exceeds context_len {cfg.context_len}")
        x = None
        for start, end in chunk_prompt(len(prompt), cfg.window_size):
            n = end - start
            x = self.weights.token_embedding[np.asarray(prompt[start:end])]  # [n, dim]
            for layer, cache in zip(self.weights.layers, self.caches):
                h = tensor.rms_norm(x, layer.attn_norm_gain)
                q = tensor.matmul(h, layer.Wq).reshape(n, cfg.n_heads, cfg.head_dim)
                q = q.transpose(1, 0, 2)                                      # [n_heads, n, head_dim]
                k_rows = tensor.matmul(h, layer.Wk).reshape(n, cfg.n_kv_heads, cfg.head_dim)
                v_rows = tensor.matmul(h, layer.Wv).reshape(n, cfg.n_kv_heads, cfg.head_dim)
                for t in range(n):
                    q[:, t, :] = tensor.rope_apply(q[:, t, :], start + t)
                    k_rows[t] = tensor.rope_apply(k_rows[t], start + t)
                if cache.filled:
                    cache_positions, k_cache, v_cache = self._gathered_window(cache)
                    keys = np.concatenate([k_cache, k_rows.transpose(1, 0, 2)], axis=1)
                    values = np.concatenate([v_cache, v_rows.transpose(1, 0, 2)], axis=1)
                else:
                    cache_positions = []
                    keys = k_rows.transpose(1, 0, 2).copy()
                    values = v_rows.transpose(1, 0, 2).copy()
                mask = attention.build_prefill_mask(start, n, cache_positions, cfg.window_size)
                ctx = attention.gqa_attend(q, keys, values, mask, self.grouping)
                merged = ctx.transpose(1, 0, 2).reshape(n, cfg.n_heads * cfg.head_dim)
                x = x + tensor.matmul(merged, layer.Wo)
                x = self._ffn(x, layer)
                cache.prefill_bulk(start, k_rows, v_rows)
        self.next_position = len(prompt)
        return self._logits(x[-1:, :])

    def generate(self, prompt, max_tokens: int = 0, sampler: SamplerSpec = SamplerSpec()) -> GenerationResult:
        """Prefill the prompt, then decode up to max_tokens continuation tokens.

        Stops early, flagging truncation, if the context limit is reached
        with tokens still to produce. The final sampled token is not fed
        back through the model.
        """
        cfg = self.config
        if max_tokens < 0:
            raise ValueError(f"max_tokens must be >= 0, got {max_tokens}")
        _check_sampler(sampler, cfg.vocab_size)
        rng = np.random.default_rng(sampler.seed)
        started = time.perf_counter()
        logits = self.prefill(prompt)
        tokens: list[int] = []
        truncated = False
        for i in range(max_tokens):
            tokens.append(sample_token(logits, sampler, rng))
            if i == max_tokens - 1:
                break
            if self.next_position >= cfg.context_len:
                truncated = True
                break
            logits = self.forward_decode(tokens[-1])
        wall_time = time.perf_counter() - started
        seq_len = self.next_position
        return GenerationResult(
            tokens=tokens,
            prompt_len=len(prompt),
            seq_len=seq_len,
            wall_time=wall_time,
            truncated=truncated,
            cache_bytes_per_layer=self.cache_bytes_per_layer,
            total_cache_bytes=self.total_cache_bytes,
            swa_score_pairs=attention.score_pair_count(seq_len, cfg.window_size),
            full_score_pairs=attention.full_pair_count(seq_len),
        )
