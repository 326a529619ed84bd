"""Weight maps over basis codebooks: soft assignment from quantization errors,
sparse masking, the degenerate single-book selection, and the weighted combine
used identically by the encoder and the decoder-side refill.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import BasisCodebooks, nearest_indices
from .latent import LatentGrid


@dataclass(frozen=True)
class WeightMap:
    """Per-super-pixel soft assignment over K codebooks, shape (u, v, K).

    Rows produced by :func:`predict_weights` are softmax outputs: entries in
    [0, 1], each row summing to 1.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 3 or w.shape[2] < 1:
            raise ValueError(f"weights must have shape (u, v, K), got {np.shape(self.weights)}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def u(self) -> int:
        return self.weights.shape[0]

    @property
    def v(self) -> int:
        return self.weights.shape[1]

    @property
    def K(self) -> int:
        return self.weights.shape[2]


@dataclass(frozen=True)
class MaskedWeights:
    """The sparse form kept after masking: per super-pixel, m (book index,
    weight) pairs stored in increasing book-index order.

    `indices` has shape (u, v, m) and holds codebook numbers, strictly
    increasing along the last axis; `values` holds the matching weights.
    Single-book selection is the m=1 case with unit weights, so downstream
    code never branches on mode.
    """

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        val = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if idx.ndim != 3 or val.shape != idx.shape:
            raise ValueError(f"indices and values must share shape (u, v, m), got {idx.shape} and {val.shape}")
        if idx.size and idx.min() < 0:
            raise ValueError("book indices must be non-negative")
        if idx.shape[2] > 1 and not np.all(np.diff(idx, axis=2) > 0):
            raise ValueError("book indices must be strictly increasing within each super-pixel")
        if not np.all(np.isfinite(val)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def u(self) -> int:
        return self.indices.shape[0]

    @property
    def v(self) -> int:
        return self.indices.shape[1]

    @property
    def m(self) -> int:
        return self.indices.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskedWeights):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.indices.tobytes(), self.values.tobytes()))


def quantization_errors(grid: LatentGrid, books: BasisCodebooks) -> np.ndarray:
    """Squared distance from each super-pixel to its nearest codeword in each
    book, shape (u, v, K)."""
    errs = np.empty((grid.u, grid.v, books.K), dtype=np.float64)
    for k, book in enumerate(books.books):
        _, errs[:, :, k] = nearest_indices(book, grid)
    return errs


def auto_temperature(errors: np.ndarray) -> float:
    """Default softmax temperature: a tenth of the mean quantization error.

    A flat all-zero error field would make any temperature act the same, so
    that case falls back to 1.0 rather than dividing by zero.
    """
    mean = float(np.mean(errors))
    return 0.1 * mean if mean > 0.0 else 1.0


def weights_from_errors(errors: np.ndarray, tau: float | None = None) -> WeightMap:
    """Softmax over negated quantization errors at temperature tau (None
    selects :func:`auto_temperature`). Shared by prediction and refilling."""
    errors = np.asarray(errors, dtype=np.float64)
    if tau is None:
        tau = auto_temperature(errors)
    if not np.isfinite(tau) or not tau > 0.0:
        raise ValueError(f"temperature must be a positive finite number, got {tau}")
    logits = -errors / tau
    logits -= logits.max(axis=2, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=2, keepdims=True)
    return WeightMap(w)


def predict_weights(grid: LatentGrid, books: BasisCodebooks, tau: float | None = None) -> WeightMap:
    """Soft codebook assignment: books that fit a super-pixel well (small
    quantization error) get weight near 1; poor fits decay toward 0. Rows sum
    to one."""
    return weights_from_errors(quantization_errors(grid, books), tau)


# Decoder-side weight restoration is the identical computation applied to the
# coarse reconstruction, so it shares the implementation.
refill_weights = predict_weights


def mask_weights(wmap: WeightMap, m: int) -> MaskedWeights:
    """Keep the m largest-magnitude weights per super-pixel, stored in book
    order. Magnitude ties break to the lower book index. Dropped weights are
    simply discarded; survivors are not renormalized.
    """
    if not (1 <= m <= wmap.K):
        raise ValueError(f"m must be in [1, {wmap.K}], got {m}")
    order = np.argsort(-np.abs(wmap.weights), axis=2, kind="stable")
    kept = np.sort(order[:, :, :m], axis=2)
    vals = np.take_along_axis(wmap.weights, kept, axis=2)
    return MaskedWeights(kept, vals)


def select_single(wmap: WeightMap) -> MaskedWeights:
    """Degenerate masking for single-book mode: the top book per super-pixel
    with an implicit weight of one (only the index is ever transmitted)."""
    top = mask_weights(wmap, 1)
    return MaskedWeights(top.indices, np.ones_like(top.values))


def quantize_weights_f16(masked: MaskedWeights) -> MaskedWeights:
    """Round weights to the nearest half-precision value, as transmitted.

    The encoder applies this before simulating the decoder so both sides
    combine exactly the values that survive serialization.
    """
    vals = masked.values.astype(np.float16).astype(np.float64)
    return MaskedWeights(masked.indices, vals)


def _stack(planes) -> np.ndarray:
    grids = list(planes)
    if not grids:
        raise ValueError("at least one quantized grid required")
    shapes = {g.vectors.shape for g in grids}
    if len(shapes) != 1:
        raise ValueError(f"quantized grids disagree on shape: {sorted(shapes)}")
    return np.stack([g.vectors for g in grids], axis=0)


def combine(wm: WeightMap | MaskedWeights, planes) -> LatentGrid:
    """Weighted sum of per-book quantized vectors: out(l) = sum_j w_j(l) q_j(l).

    `planes` is the sequence of K retrieved grids. A dense WeightMap is routed
    through mask_weights at m = K, so the sparse gather below is the one
    combine path in the codec and masking at m = K reproduces the dense
    result bit for bit.
    """
    if isinstance(wm, WeightMap):
        wm = mask_weights(wm, wm.K)
    q = _stack(planes)
    K, u, v, _ = q.shape
    if (wm.u, wm.v) != (u, v):
        raise ValueError(f"weight grid {(wm.u, wm.v)} does not match vector grid {(u, v)}")
    if wm.indices.size and wm.indices.max() >= K:
        raise ValueError(f"book index {int(wm.indices.max())} out of range for {K} books")
    uu = np.arange(u)[:, np.newaxis, np.newaxis]
    vv = np.arange(v)[np.newaxis, :, np.newaxis]
    picked = q[wm.indices, uu, vv, :]
    out = np.einsum("uvm,uvmd->uvd", wm.values, picked)
    return LatentGrid(out)
