"""Invertible block embedding between images and the latent super-pixel grid.

An image is cut into f x f blocks per channel; each block becomes one
super-pixel vector of dimension d = f*f*c, either flattened as-is or mapped
through an orthonormal 2-D DCT-II basis. Both modes are exactly invertible,
so every downstream reconstruction error is attributable to quantization and
weight masking rather than to the embedding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .image import Image


class Transform(enum.IntEnum):
    """Per-block transform applied after flattening. Values are the wire codes."""

    FLATTEN = 0
    DCT = 1


@dataclass(frozen=True)
class EmbedConfig:
    patch_size: int = 8
    transform: Transform = Transform.DCT

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        object.__setattr__(self, "transform", Transform(self.transform))


@dataclass(frozen=True)
class LatentGrid:
    """A u x v grid of d-dimensional super-pixel vectors, shape (u, v, d)."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"vectors must have shape (u, v, d), got {np.shape(self.vectors)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("latent vectors must be finite")
        object.__setattr__(self, "vectors", v)

    @property
    def u(self) -> int:
        return self.vectors.shape[0]

    @property
    def v(self) -> int:
        return self.vectors.shape[1]

    @property
    def d(self) -> int:
        return self.vectors.shape[2]


# Alias used where a grid is known to hold codewords retrieved from one codebook.
QuantizedGrid = LatentGrid


@lru_cache(maxsize=None)
def dct_matrix(f: int) -> np.ndarray:
    """Orthonormal DCT-II basis of size f x f (rows are basis vectors)."""
    i = np.arange(f)
    mat = np.cos(np.pi * (2.0 * i[np.newaxis, :] + 1.0) * i[:, np.newaxis] / (2.0 * f))
    mat *= np.sqrt(2.0 / f)
    mat[0, :] = np.sqrt(1.0 / f)
    mat.setflags(write=False)
    return mat


def transform_matrix(cfg: EmbedConfig, channels: int) -> np.ndarray:
    """The d x d matrix T mapping a flattened raw block to its super-pixel vector.

    Row-major block order with interleaved channels: raw index (i*f + j)*c + ch.
    In DCT mode T = kron(kron(D, D), I_c); in flatten mode T = I.
    """
    d = cfg.patch_size * cfg.patch_size * channels
    if cfg.transform == Transform.FLATTEN:
        return np.eye(d)
    basis = dct_matrix(cfg.patch_size)
    return np.kron(np.kron(basis, basis), np.eye(channels))


def _pad_to_multiple(samples: np.ndarray, f: int) -> np.ndarray:
    h, w = samples.shape[:2]
    pad_h = (-h) % f
    pad_w = (-w) % f
    if pad_h == 0 and pad_w == 0:
        return samples
    return np.pad(samples, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")


def patchify(image: Image, cfg: EmbedConfig) -> LatentGrid:
    """Embed an image into the latent grid; pads by edge replication if needed.

    u = ceil(h/f), v = ceil(w/f), d = f*f*c. Each vector is the (optionally
    DCT-transformed) block, flattened row-major with channels interleaved.
    """
    f = cfg.patch_size
    padded = _pad_to_multiple(image.samples, f)
    h, w, c = padded.shape
    u, v = h // f, w // f
    blocks = padded.reshape(u, f, v, f, c).transpose(0, 2, 1, 3, 4)
    if cfg.transform == Transform.DCT:
        basis = dct_matrix(f)
        blocks = np.einsum("ki,uvijc->uvkjc", basis, blocks)
        blocks = np.einsum("lj,uvkjc->uvklc", basis, blocks)
    return LatentGrid(np.ascontiguousarray(blocks.reshape(u, v, f * f * c)))


def unpatchify(grid: LatentGrid, original_dims: tuple[int, int, int], cfg: EmbedConfig) -> Image:
    """Invert :func:`patchify`, crop to the original size, clamp to [0, 1].

    `original_dims` is (width, height, channels) as recorded at encode time.
    """
    width, height, channels = original_dims
    f = cfg.patch_size
    u, v = grid.u, grid.v
    if grid.d != f * f * channels:
        raise ValueError(f"grid dimension {grid.d} does not match f*f*c = {f * f * channels}")
    if u != -(-height // f) or v != -(-width // f):
        raise ValueError(f"grid {u}x{v} does not cover a {width}x{height} image at patch size {f}")
    blocks = grid.vectors.reshape(u, v, f, f, channels)
    if cfg.transform == Transform.DCT:
        basis = dct_matrix(f)
        blocks = np.einsum("ki,uvijc->uvkjc", basis.T, blocks)
        blocks = np.einsum("lj,uvkjc->uvklc", basis.T, blocks)
    samples = blocks.transpose(0, 2, 1, 3, 4).reshape(u * f, v * f, channels)
    samples = np.clip(samples[:height, :width, :], 0.0, 1.0)
    return Image(samples)


def collect_patch_vectors(images, cfg: EmbedConfig) -> np.ndarray:
    """Stack all super-pixel vectors from `images` into one (N, d) training set."""
    parts = [patchify(img, cfg).vectors.reshape(-1, cfg.patch_size**2 * img.channels) for img in images]
    if not parts:
        raise ValueError("no images supplied")
    return np.concatenate(parts, axis=0)
