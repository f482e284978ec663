"""Model hyperparameters, validation, and analytic architecture properties.

The engine is dimension-driven: every tensor shape, cache size, and mask in
the package derives from the nine integers collected here.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

CONFIG_KEYS: tuple[str, ...] = (
    "dim",
    "n_layers",
    "head_dim",
    "hidden_dim",
    "n_heads",
    "n_kv_heads",
    "window_size",
    "context_len",
    "vocab_size",
)


class ConfigError(ValueError):
    """Raised for unparseable or invalid configuration documents."""


@dataclass(frozen=True)
class ModelConfig:
    """Decoder hyperparameters. Immutable, safe to share across threads."""

    dim: int          # embedding width
    n_layers: int
    head_dim: int     # per-head width
    hidden_dim: int   # feed-forward inner width
    n_heads: int      # query head count
    n_kv_heads: int   # key/value head count (query heads share kv heads in groups)
    window_size: int  # sliding window width W in keys, self included
    context_len: int  # maximum supported positions
    vocab_size: int


#: Desk-scale preset used by the verification harness, demos, and tests.
PRESET_TOY = ModelConfig(
    dim=64, n_layers=4, head_dim=16, hidden_dim=128,
    n_heads=4, n_kv_heads=2, window_size=8, context_len=128, vocab_size=256,
)

#: Production-scale 7B reference preset. Used for analytics only; this
#: engine never executes at this size.
PRESET_7B = ModelConfig(
    dim=4096, n_layers=32, head_dim=128, hidden_dim=14336,
    n_heads=32, n_kv_heads=8, window_size=4096, context_len=8192, vocab_size=32000,
)


def validate(config: ModelConfig) -> list[str]:
    """Return the list of violated invariants, empty when the config is valid.

    Total: never raises. Every input yields either an empty list (ok) or the
    names of all violated rules.
    """
    violations: list[str] = []
    for name in CONFIG_KEYS:
        if getattr(config, name) <= 0:
            violations.append(f"{name} > 0")
    if config.dim != config.n_heads * config.head_dim:
        violations.append("dim == n_heads*head_dim")
    if config.n_kv_heads >= 1 and config.n_heads % config.n_kv_heads != 0:
        violations.append("n_heads % n_kv_heads == 0")
    if not (1 <= config.window_size <= config.context_len):
        violations.append("1 <= window_size <= context_len")
    return violations


def parse_config(text: str) -> ModelConfig:
    """Parse a JSON configuration document carrying exactly the nine known keys.

    Raises ConfigError naming the offending key for a missing key, an
    unexpected key, or a non-integer value, and naming the violated rules
    when the parsed values fail validation.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    for key in CONFIG_KEYS:
        if key not in doc:
            raise ConfigError(f"missing key: {key!r}")
    for key in doc:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unexpected key: {key!r}")
    values: dict[str, int] = {}
    for key in CONFIG_KEYS:
        value = doc[key]
        # JSON booleans are ints to Python; they are not valid here.
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"non-integer value for {key!r}: {value!r}")
        values[key] = value
    config = ModelConfig(**values)
    violations = validate(config)
    if violations:
        raise ConfigError("invalid config: " + "; ".join(violations))
    return config


def config_to_json(config: ModelConfig) -> str:
    """Serialize to the nine-key JSON document format."""
    return json.dumps(asdict(config))


def theoretical_span(config: ModelConfig) -> int:
    """Upper bound on how far information can travel through the layer stack.

    Each attention layer moves information forward at most window_size
    positions, so n_layers stacked layers span n_layers * window_size tokens.
    """
    return config.n_layers * config.window_size


def exact_reach(config: ModelConfig) -> int:
    """Input positions visible to one output under this window convention.

    A window of W keys including self reaches back W - 1 positions per
    layer, so an output at position i sees inputs down to
    i - n_layers*(W - 1): that is n_layers*(W - 1) + 1 distinct positions.
    """
    return config.n_layers * (config.window_size - 1) + 1


def parameter_count(config: ModelConfig) -> int:
    """Total scalar count over all decoder weight tensors.

    Per layer: two norm gains, the query/key/value/output projections, and
    the three gated feed-forward projections. The token embedding and the
    output projection are separate (untied) tensors.
    """
    d, hidden = config.dim, config.hidden_dim
    q_width = config.n_heads * config.head_dim
    kv_width = config.n_kv_heads * config.head_dim
    per_layer = (
        2 * d                 # attention + feed-forward norm gains
        + d * q_width         # Wq
        + 2 * d * kv_width    # Wk, Wv
        + q_width * d         # Wo
        + 2 * d * hidden      # W1, W3
        + hidden * d          # W2
    )
    return (
        config.vocab_size * d
        + config.n_layers * per_layer
        + d                   # final norm gain
        + d * config.vocab_size
    )


def cache_memory_ratio(seq_len: int, config: ModelConfig) -> float:
    """Unbounded-history cache entries over rolling-cache entries at seq_len."""
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    return seq_len / min(seq_len, config.window_size)
