"""Decoder weight tensors: random initialization and the binary file format.

Weight sets are immutable once built and safe to share across sessions and
threads. The file format is little-endian: magic "MWDC", a u32 version, a
u32 byte length followed by the embedded JSON config document, then every
tensor as raw row-major float32 in canonical field order with no per-tensor
headers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ModelConfig, config_to_json, parameter_count, parse_config, validate
from .tensor import Tensor

WEIGHT_MAGIC = b"MWDC"
WEIGHT_VERSION = 1

_LAYER_FIELDS = ("attn_norm_gain", "Wq", "Wk", "Wv", "Wo", "ffn_norm_gain", "W1", "W2", "W3")


class WeightFormatError(ValueError):
    """Raised when a weight file fails a structural check."""


@dataclass
class LayerWeights:
    attn_norm_gain: Tensor  # [dim]
    Wq: Tensor              # [dim, n_heads*head_dim]
    Wk: Tensor              # [dim, n_kv_heads*head_dim]
    Wv: Tensor              # [dim, n_kv_heads*head_dim]
    Wo: Tensor              # [n_heads*head_dim, dim]
    ffn_norm_gain: Tensor   # [dim]
    W1: Tensor              # [dim, hidden_dim]
    W2: Tensor              # [hidden_dim, dim]
    W3: Tensor              # [dim, hidden_dim]


@dataclass
class DecoderWeights:
    config: ModelConfig
    token_embedding: Tensor  # [vocab_size, dim]
    layers: list[LayerWeights]
    final_norm_gain: Tensor  # [dim]
    output_proj: Tensor      # [dim, vocab_size]

    def named_tensors(self):
        """Yield (name, tensor) pairs in canonical serialization order."""
        yield "token_embedding", self.token_embedding
        for i, layer in enumerate(self.layers):
            for field in _LAYER_FIELDS:
                yield f"layers[{i}].{field}", getattr(layer, field)
        yield "final_norm_gain", self.final_norm_gain
        yield "output_proj", self.output_proj

    def element_count(self) -> int:
        return sum(t.size for _, t in self.named_tensors())


def tensor_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) list, in serialization order, for a config."""
    d = config.dim
    q_width = config.n_heads * config.head_dim
    kv_width = config.n_kv_heads * config.head_dim
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("token_embedding", (config.vocab_size, d))
    ]
    for i in range(config.n_layers):
        shapes += [
            (f"layers[{i}].attn_norm_gain", (d,)),
            (f"layers[{i}].Wq", (d, q_width)),
            (f"layers[{i}].Wk", (d, kv_width)),
            (f"layers[{i}].Wv", (d, kv_width)),
            (f"layers[{i}].Wo", (q_width, d)),
            (f"layers[{i}].ffn_norm_gain", (d,)),
            (f"layers[{i}].W1", (d, config.hidden_dim)),
            (f"layers[{i}].W2", (config.hidden_dim, d)),
            (f"layers[{i}].W3", (d, config.hidden_dim)),
        ]
    shapes += [("final_norm_gain", (d,)), ("output_proj", (d, config.vocab_size))]
    return shapes


def _assemble(config: ModelConfig, tensors: list[Tensor]) -> DecoderWeights:
    it = iter(tensors)
    token_embedding = next(it)
    layers = [LayerWeights(*(next(it) for _ in _LAYER_FIELDS)) for _ in range(config.n_layers)]
    final_norm_gain = next(it)
    output_proj = next(it)
    return DecoderWeights(config, token_embedding, layers, final_norm_gain, output_proj)


def init_random(config: ModelConfig, seed: int) -> DecoderWeights:
    """Seeded random weights, bitwise reproducible for a given (config, seed).

    Projection tensors are scaled by 0.02/sqrt(n_layers); norm gains keep
    the generator's unit scale.
    """
    violations = validate(config)
    if violations:
        raise ValueError("invalid config: " + "; ".join(violations))
    rng = np.random.default_rng(seed)
    proj_scale = np.float32(0.02 / math.sqrt(config.n_layers))
    tensors = []
    for name, shape in tensor_shapes(config):
        draw = rng.standard_normal(shape, dtype=np.float32)
        if not name.endswith("norm_gain"):
            draw *= proj_scale
        tensors.append(draw)
    return _assemble(config, tensors)


def save_weights(weights: DecoderWeights, path) -> None:
    """Write magic, version, the embedded config document, then raw tensors."""
    doc = config_to_json(weights.config).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<II", WEIGHT_VERSION, len(doc)))
        fh.write(doc)
        for _, t in weights.named_tensors():
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_weights(path) -> DecoderWeights:
    """Read and validate a weight file; every rejected check names itself."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != WEIGHT_MAGIC:
        raise WeightFormatError(f"bad magic: expected {WEIGHT_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 12:
        raise WeightFormatError("header truncated")
    version, doc_len = struct.unpack_from("<II", blob, 4)
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported version: {version} (expected {WEIGHT_VERSION})")
    header_end = 12 + doc_len
    if len(blob) < header_end:
        raise WeightFormatError("embedded config document truncated")
    try:
        config = parse_config(blob[12:header_end].decode("utf-8"))
    except (ConfigError, UnicodeDecodeError) as exc:
        raise WeightFormatError(f"embedded config rejected: {exc}") from None
    expected_len = header_end + parameter_count(config) * 4
    if len(blob) != expected_len:
        raise WeightFormatError(
            f"file length {len(blob)} does not match header + parameter_count*4 = {expected_len}"
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=header_end)
    tensors = []
    cursor = 0
    for name, shape in tensor_shapes(config):
        size = int(np.prod(shape))
        t = flat[cursor:cursor + size].reshape(shape).astype(np.float32)
        if not np.isfinite(t).all():
            raise WeightFormatError(f"non-finite values in {name}")
        tensors.append(t)
        cursor += size
    return _assemble(config, tensors)
