"""Desk-scale image codec built on masked sparse combination of basis
codebooks: images embed into a latent grid, quantize against K codebooks, and
travel as integer index planes plus a sparsely masked weight map that the
decoder refills before reconstructing.
"""

from .bitstream import (
    BitReport,
    EncodedImage,
    Mode,
    bit_report,
    compress_index_planes,
    decompress_index_planes,
    dequantize_weight16,
    deserialize,
    pack_uints,
    quantize_weight16,
    serialize,
    unpack_uints,
)
from .codebook import (
    BasisCodebooks,
    Codebook,
    IndexPlane,
    load_codebooks,
    nearest_codeword,
    quantize_plane,
    retrieve_plane,
    save_codebooks,
    train_codebooks,
)
from .codec import (
    EncodeSettings,
    EncodeStats,
    Model,
    decode,
    encode,
    load_model,
    quantize_image,
    reconstruct,
    save_model,
    train_model,
)
from .errors import (
    BitstreamError,
    CorruptStreamError,
    IncompatibleModelError,
    NotABitstreamError,
    UnsupportedVersionError,
)
from .image import Image, load_image, save_image
from .latent import EmbedConfig, LatentGrid, QuantizedGrid, Transform, patchify, unpatchify
from .metrics import RDPoint, RDTable, default_settings, psnr, rd_sweep, ssim, to_csv
from .synthetic import desk_corpus, synthetic_image
from .weights import (
    MaskedWeights,
    WeightMap,
    combine,
    mask_weights,
    predict_weights,
    refill_weights,
    select_single,
)

__version__ = "0.1.0"

__all__ = [
    "BasisCodebooks",
    "BitReport",
    "BitstreamError",
    "Codebook",
    "CorruptStreamError",
    "EmbedConfig",
    "EncodeSettings",
    "EncodeStats",
    "EncodedImage",
    "Image",
    "IncompatibleModelError",
    "IndexPlane",
    "LatentGrid",
    "MaskedWeights",
    "Mode",
    "Model",
    "NotABitstreamError",
    "QuantizedGrid",
    "RDPoint",
    "RDTable",
    "Transform",
    "UnsupportedVersionError",
    "WeightMap",
    "bit_report",
    "combine",
    "compress_index_planes",
    "decode",
    "decompress_index_planes",
    "default_settings",
    "dequantize_weight16",
    "deserialize",
    "desk_corpus",
    "encode",
    "load_codebooks",
    "load_image",
    "load_model",
    "mask_weights",
    "nearest_codeword",
    "pack_uints",
    "patchify",
    "predict_weights",
    "psnr",
    "quantize_image",
    "quantize_plane",
    "quantize_weight16",
    "rd_sweep",
    "reconstruct",
    "refill_weights",
    "retrieve_plane",
    "save_codebooks",
    "save_image",
    "save_model",
    "select_single",
    "serialize",
    "ssim",
    "synthetic_image",
    "to_csv",
    "train_codebooks",
    "train_model",
    "unpack_uints",
    "unpatchify",
]
