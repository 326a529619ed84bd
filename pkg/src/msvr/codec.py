"""End-to-end codec: model training, encode, decode with optional weight
refilling, and the model file format.

Encode: block-embed the image, quantize against every basis codebook, predict
soft weights from the quantization errors, keep a sparse subset (or just the
best book per cell), round the kept weights to half precision, and serialize.
Decode: retrieve the per-book vectors, combine them under the transmitted
weights into a coarse latent, re-predict dense weights from that coarse
latent, and combine again before inverting the block embedding. Skipping the
re-prediction yields the coarse reconstruction directly.

The encoder always runs the decoder's combine on its own output, so the
distortion it reports is exactly what the receiver will see.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .bitstream import BitReport, EncodedImage, Mode, bit_report, deserialize, serialize_counted
from .codebook import (
    BasisCodebooks,
    IndexPlane,
    load_codebooks,
    nearest_indices,
    retrieve_plane,
    save_codebooks,
    train_codebooks,
)
from .errors import CorruptStreamError, IncompatibleModelError, NotABitstreamError, UnsupportedVersionError
from .image import Image
from .latent import EmbedConfig, LatentGrid, Transform, collect_patch_vectors, patchify, unpatchify
from .weights import (
    combine,
    mask_weights,
    quantize_weights_f16,
    refill_weights,
    select_single,
    weights_from_errors,
)

MODEL_MAGIC = b"MSVM"
MODEL_VERSION = 1

DEFAULT_PATCH = 8
DEFAULT_K = 4
DEFAULT_BOOK_SIZE = 512
DEFAULT_M = 2


@dataclass(frozen=True)
class Model:
    """Trained codec state: the basis codebooks plus the embedding settings
    and softmax temperature they were meant for (tau=None derives the
    temperature from each latent's quantization errors). Shared out-of-band
    by encoder and decoder."""

    books: BasisCodebooks
    patch_size: int = DEFAULT_PATCH
    transform: Transform = Transform.DCT
    tau: float | None = None

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch size must be >= 1, got {self.patch_size}")
        if self.tau is not None and not (self.tau > 0.0):
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.books.dim % (self.patch_size**2) != 0:
            raise ValueError(
                f"codebook dimension {self.books.dim} is not a multiple of patch area {self.patch_size**2}"
            )

    @property
    def channels(self) -> int:
        return self.books.dim // (self.patch_size**2)

    @property
    def embed_config(self) -> EmbedConfig:
        return EmbedConfig(patch_size=self.patch_size, transform=self.transform)


@dataclass(frozen=True)
class EncodeSettings:
    """Per-encode choices: weight mode and kept-book count, whether planes
    travel deflated, and whether the simulated decode refills weights."""

    mode: Mode = Mode.MASKED
    m: int = DEFAULT_M
    compress_indices: bool = True
    filler: bool = True

    def __post_init__(self):
        if self.mode == Mode.MASKED and self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class EncodeStats:
    """What one encode cost and how it will decode: the bit accounting,
    wall-clock seconds per stage, and the latent-space distances of the
    coarse and final reconstructions from the unquantized latent."""

    report: BitReport
    timings: dict[str, float] = field(compare=False)
    coarse_latent_dist: float = 0.0
    recovered_latent_dist: float = 0.0


def train_model(
    images,
    K: int = DEFAULT_K,
    n: int = DEFAULT_BOOK_SIZE,
    patch_size: int = DEFAULT_PATCH,
    transform: Transform = Transform.DCT,
    tau: float | None = None,
    seed: int = 0,
) -> Model:
    """Fit basis codebooks to the block embeddings of a training image set."""
    cfg = EmbedConfig(patch_size=patch_size, transform=transform)
    vectors = collect_patch_vectors(images, cfg)
    books = train_codebooks(vectors, K=K, n=n, seed=seed)
    return Model(books=books, patch_size=patch_size, transform=transform, tau=tau)


def quantize_image(image: Image, model: Model, settings: EncodeSettings = EncodeSettings()) -> EncodedImage:
    """The structural half of encoding: index planes plus the sparse,
    half-precision weight set, before serialization."""
    enc, _, _ = _quantize_timed(image, model, settings)
    return enc


def _quantize_timed(image, model, settings):
    if image.channels != model.channels:
        raise IncompatibleModelError(f"model expects {model.channels}-channel images, got {image.channels}")
    books = model.books
    if settings.mode == Mode.MASKED and settings.m > books.K:
        raise ValueError(f"cannot keep m={settings.m} books out of {books.K}")

    t0 = time.perf_counter()
    grid = patchify(image, model.embed_config)
    t1 = time.perf_counter()
    planes = []
    errors = np.empty((grid.u, grid.v, books.K), dtype=np.float64)
    for k, book in enumerate(books.books):
        idx, errors[:, :, k] = nearest_indices(book, grid)
        planes.append(IndexPlane(idx))
    t2 = time.perf_counter()
    wmap = weights_from_errors(errors, model.tau)
    masked = select_single(wmap) if settings.mode == Mode.SINGLE else mask_weights(wmap, settings.m)
    masked = quantize_weights_f16(masked)
    t3 = time.perf_counter()

    enc = EncodedImage(
        width=image.width,
        height=image.height,
        channels=image.channels,
        patch_size=model.patch_size,
        transform=model.transform,
        mode=settings.mode,
        m=masked.m,
        sizes=books.sizes,
        compress_indices=settings.compress_indices,
        planes=tuple(planes),
        masked=masked,
    )
    return enc, grid, {"embed": t1 - t0, "quantize": t2 - t1, "weights": t3 - t2}


def _reconstruct_latent(enc: EncodedImage, model: Model, filler: bool) -> tuple[LatentGrid, LatentGrid]:
    """Coarse and final latents for a stream: the weighted combine of the
    retrieved planes, then (with the filler) the re-predicted dense combine."""
    books = model.books
    grids = [retrieve_plane(book, plane) for book, plane in zip(books.books, enc.planes)]
    coarse = combine(enc.masked, grids)
    if not filler:
        return coarse, coarse
    refilled = refill_weights(coarse, books, model.tau)
    return coarse, combine(refilled, grids)


def encode(image: Image, model: Model, settings: EncodeSettings = EncodeSettings()) -> tuple[bytes, EncodeStats]:
    """Compress an image against a model. Returns the byte stream and stats
    from an encoder-side run of the decoder on that very stream content."""
    enc, grid, timings = _quantize_timed(image, model, settings)

    t0 = time.perf_counter()
    data, counts = serialize_counted(enc)
    t1 = time.perf_counter()
    coarse, final = _reconstruct_latent(enc, model, settings.filler)
    t2 = time.perf_counter()
    timings["serialize"] = t1 - t0
    timings["simulate"] = t2 - t1

    report = bit_report(
        enc.u,
        enc.v,
        enc.K,
        enc.sizes,
        enc.mode,
        enc.m,
        enc.width,
        enc.height,
        compressed_c=counts.index_bits if enc.compress_indices else None,
    )
    stats = EncodeStats(
        report=report,
        timings=timings,
        coarse_latent_dist=float(np.linalg.norm(coarse.vectors - grid.vectors)),
        recovered_latent_dist=float(np.linalg.norm(final.vectors - grid.vectors)),
    )
    return data, stats


def _check_compatible(enc: EncodedImage, model: Model):
    problems = []
    if model.patch_size != enc.patch_size:
        problems.append(f"patch size {model.patch_size} vs stream {enc.patch_size}")
    if model.transform != enc.transform:
        problems.append(f"transform {model.transform.name} vs stream {enc.transform.name}")
    if model.books.K != enc.K:
        problems.append(f"{model.books.K} codebooks vs stream {enc.K}")
    elif model.books.sizes != enc.sizes:
        problems.append(f"codebook sizes {model.books.sizes} vs stream {enc.sizes}")
    if model.channels != enc.channels:
        problems.append(f"{model.channels}-channel model vs {enc.channels}-channel stream")
    if problems:
        raise IncompatibleModelError("model does not fit stream: " + "; ".join(problems))


def reconstruct(enc: EncodedImage, model: Model, filler: bool = True) -> Image:
    """Decode an in-memory encoded image."""
    _check_compatible(enc, model)
    _, latent = _reconstruct_latent(enc, model, filler)
    return unpatchify(latent, (enc.width, enc.height, enc.channels), model.embed_config)


def decode(data: bytes, model: Model, filler: bool = True) -> Image:
    """Reconstruct an image from a byte stream. With `filler` (the default),
    dense weights are re-predicted from the coarse combined latent for the
    final combine; without it the coarse latent is inverted directly."""
    return reconstruct(deserialize(data), model, filler=filler)


def save_model(model: Model) -> bytes:
    """Model file: magic, version, patch size, transform, an optional fixed
    temperature, then the codebook block."""
    tau_fixed = model.tau is not None
    head = MODEL_MAGIC + struct.pack(
        "<BBBBd",
        MODEL_VERSION,
        model.patch_size,
        int(model.transform),
        1 if tau_fixed else 0,
        model.tau if tau_fixed else 0.0,
    )
    return head + save_codebooks(model.books)


def load_model(data: bytes) -> Model:
    if data[:4] != MODEL_MAGIC:
        raise NotABitstreamError("missing model magic")
    try:
        version, patch, transform_code, tau_flag, tau = struct.unpack_from("<BBBBd", data, 4)
    except struct.error as exc:
        raise CorruptStreamError("model header truncated") from exc
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(f"model version {version} not supported")
    try:
        transform = Transform(transform_code)
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from exc
    if tau_flag not in (0, 1):
        raise CorruptStreamError(f"unknown temperature flag {tau_flag}")
    books, end = load_codebooks(data, 4 + struct.calcsize("<BBBBd"))
    if end != len(data):
        raise CorruptStreamError("trailing bytes after model payload")
    try:
        return Model(
            books=books,
            patch_size=patch,
            transform=transform,
            tau=tau if tau_flag == 1 else None,
        )
    except ValueError as exc:
        raise CorruptStreamError(f"model fields inconsistent: {exc}") from exc
