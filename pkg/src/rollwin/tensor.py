"""Minimal dense float32 kernel with a reproducible accumulation order.

Tensors are plain numpy float32 ndarrays, row-major. Every reduction here
(matrix products, softmax normalizers, mean-square norms) accumulates
strictly left-to-right in float32, so a row pushed through a block operation
is bit-identical to the same row pushed through alone. BLAS-backed matmul
does not give that guarantee, which is why the products below loop over the
shared axis explicitly; elementwise work is delegated to numpy.

Operations never mutate their inputs. Results are fresh allocations.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray

#: Rotation frequency base for rotary position embedding.
ROPE_THETA = 10000.0

#: Variance floor for rms_norm.
RMS_NORM_EPS = 1e-5


def _f32(x) -> Tensor:
    return np.asarray(x, dtype=np.float32)


def _ordered_sum(x: Tensor) -> Tensor:
    """Sum over the trailing axis, accumulating strictly left-to-right."""
    total = np.zeros(x.shape[:-1], dtype=np.float32)
    for j in range(x.shape[-1]):
        np.add(total, x[..., j], out=total)
    return total


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with fixed left-to-right accumulation per dot product."""
    a, b = _f32(a), _f32(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    term = np.empty_like(out)
    for k in range(a.shape[1]):
        np.multiply(a[:, k, np.newaxis], b[k, np.newaxis, :], out=term)
        np.add(out, term, out=out)
    return out


def softmax_stable(x: Tensor, masked: Tensor | None = None) -> Tensor:
    """Softmax over the trailing axis, stabilized by max-subtraction.

    `masked` marks entries to exclude: they are dropped from the max and the
    normalizer (never set to -inf) and come back as exactly 0. Each slice
    must keep at least one entry.
    """
    x = _f32(x)
    if masked is None:
        keep = np.ones(x.shape, dtype=bool)
    else:
        keep = ~np.asarray(masked, dtype=bool)
        if keep.shape != x.shape:
            raise ValueError(f"mask shape {keep.shape} != input shape {x.shape}")
    if not keep.any(axis=-1).all():
        raise ValueError("degenerate attention row: all entries masked")
    peak = np.max(x, axis=-1, keepdims=True, where=keep, initial=np.float32(-np.inf))
    shifted = np.where(keep, x - peak, np.float32(0.0))
    weights = np.where(keep, np.exp(shifted), np.float32(0.0))
    total = _ordered_sum(weights)[..., np.newaxis]
    return weights / total


def rms_norm(x: Tensor, gain: Tensor, eps: float = RMS_NORM_EPS) -> Tensor:
    """Scale each trailing-axis slice to unit root-mean-square, then by gain."""
    x, gain = _f32(x), _f32(gain)
    if gain.ndim != 1 or x.shape[-1] != gain.shape[0]:
        raise ValueError(f"rms_norm gain shape {gain.shape} does not fit input shape {x.shape}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    mean_sq = _ordered_sum(x * x) / np.float32(x.shape[-1])
    denom = np.sqrt(mean_sq + np.float32(eps))[..., np.newaxis]
    return x / denom * gain


def rope_apply(x: Tensor, position: int, theta_base: float = ROPE_THETA) -> Tensor:
    """Rotate trailing-axis pairs (x[2j], x[2j+1]) by position-scaled angles.

    Pair j turns by position * theta_base**(-2j / head_dim), so dot products
    between rotated queries and keys depend only on relative position. Each
    pair keeps its Euclidean norm; position 0 is the identity.
    """
    x = _f32(x)
    head_dim = x.shape[-1]
    if head_dim % 2 != 0:
        raise ValueError(f"rope_apply needs an even trailing dimension, got {head_dim}")
    if position < 0:
        raise ValueError(f"position must be non-negative, got {position}")
    # Angles in float64; token positions stay exact well past any context_len.
    angles = position * theta_base ** (-2.0 * np.arange(head_dim // 2) / head_dim)
    cos = np.cos(angles).astype(np.float32)
    sin = np.sin(angles).astype(np.float32)
    even, odd = x[..., 0::2], x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


def silu_gate(x1: Tensor, x3: Tensor) -> Tensor:
    """Gated activation: silu(x1) * x3 with silu(t) = t / (1 + exp(-t))."""
    x1, x3 = _f32(x1), _f32(x3)
    if x1.shape != x3.shape:
        raise ValueError(f"silu_gate shape mismatch: {x1.shape} vs {x3.shape}")
    # exp(-t) may overflow for very negative t; the quotient then underflows
    # to the correct limit 0, so the warning alone is suppressed.
    with np.errstate(over="ignore"):
        act = x1 / (np.float32(1.0) + np.exp(-x1))
    return act * x3
