"""Bit-exact stream format: MSB-first bit packing, half-precision weight
fields, the bit-cost accounting report, and (de)serialization of encoded
images with optional deflate on the index planes.

Stream layout, all multi-byte integers little-endian:

    magic "MSVR" | version u8 | width u32 | height u32 | channels u8 |
    patch u8 | transform u8 | mode u8 | m u8 | K u8 | log2(n_k) u8 x K |
    compression flag u8 |
    index planes (raw bit-packed, or u32 byte length + deflate payload) |
    weight section (masked: m x [log2 K-bit book index + 16-bit weight] per
    super-pixel, pairs in increasing book order; single: one log2 K-bit book
    index per super-pixel)

Raw planes are packed back to back with a single pad to the next byte at the
end of the section; the weight section pads once at the end of the stream.
Every non-pad, non-header bit is meaningful payload, which is what the
accounting formulas count.
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .codebook import IndexPlane
from .errors import CorruptStreamError, NotABitstreamError, UnsupportedVersionError
from .latent import Transform
from .weights import MaskedWeights

STREAM_MAGIC = b"MSVR"
STREAM_VERSION = 1
_HEADER_FMT = "<BIIBBBBBB"

WEIGHT_FIELD_BITS = 16


class Mode(enum.IntEnum):
    """Weight transmission mode (values are the wire encoding)."""

    MASKED = 0
    SINGLE = 1


def floor_log2(n: int) -> int:
    if n < 1:
        raise ValueError(f"need a positive integer, got {n}")
    return n.bit_length() - 1


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class BitWriter:
    """Accumulates unsigned integers MSB-first into a byte string.

    `bits_written` counts meaningful payload bits; alignment padding is
    tracked separately so accounting can exclude it.
    """

    def __init__(self):
        self._chunks: list[np.ndarray] = []
        self.bits_written = 0
        self._total_bits = 0

    def write(self, value: int, width: int):
        self.write_array([value], width)

    def write_array(self, values, width: int):
        arr = np.asarray(values, dtype=np.int64).ravel()
        if arr.size == 0:
            return
        if arr.min() < 0 or arr.max() >= (1 << width):
            raise ValueError(f"values outside [0, 2^{width})")
        if width == 0:
            return
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        bits = ((arr.astype(np.uint64)[:, np.newaxis] >> shifts) & 1).astype(np.uint8)
        self._chunks.append(bits.ravel())
        self.bits_written += arr.size * width
        self._total_bits += arr.size * width

    def pad_to_byte(self) -> int:
        """Zero-pad to a byte boundary; pad bits are not counted as payload."""
        pad = (-self._total_bits) % 8
        if pad:
            self._chunks.append(np.zeros(pad, dtype=np.uint8))
            self._total_bits += pad
        return pad

    def getvalue(self) -> bytes:
        if self._total_bits % 8:
            raise ValueError("bit writer not byte-aligned; call pad_to_byte first")
        if not self._chunks:
            return b""
        return np.packbits(np.concatenate(self._chunks)).tobytes()


class BitReader:
    """MSB-first counterpart of :class:`BitWriter`."""

    def __init__(self, data: bytes, offset: int = 0):
        self._data = data
        self._pos = offset * 8

    def read(self, width: int) -> int:
        return int(self.read_array(1, width)[0])

    def read_array(self, count: int, width: int) -> np.ndarray:
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count}")
        if width == 0 or count == 0:
            return np.zeros(count, dtype=np.int64)
        need = count * width
        end = self._pos + need
        if end > len(self._data) * 8:
            raise CorruptStreamError("bitstream truncated")
        lo = self._pos // 8
        hi = (end + 7) // 8
        bits = np.unpackbits(np.frombuffer(self._data, dtype=np.uint8, count=hi - lo, offset=lo))
        start = self._pos - lo * 8
        window = bits[start : start + need].reshape(count, width).astype(np.int64)
        pow2 = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
        self._pos = end
        return window @ pow2

    def align_to_byte(self):
        self._pos = ((self._pos + 7) // 8) * 8

    @property
    def byte_offset(self) -> int:
        return (self._pos + 7) // 8


def pack_uints(values, width: int) -> bytes:
    """Pack unsigned integers MSB-first at a fixed width of 1..32 bits,
    zero-padded to a byte boundary."""
    if not (1 <= width <= 32):
        raise ValueError(f"width must be in [1, 32], got {width}")
    writer = BitWriter()
    writer.write_array(values, width)
    writer.pad_to_byte()
    return writer.getvalue()


def unpack_uints(data: bytes, width: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_uints` for a known element count; trailing pad
    bits are ignored."""
    if not (1 <= width <= 32):
        raise ValueError(f"width must be in [1, 32], got {width}")
    return BitReader(data).read_array(count, width)


def quantize_weight16(x: float) -> int:
    """Round to the nearest half-precision value (ties to even) and return
    its 16-bit pattern."""
    if not math.isfinite(x):
        raise ValueError(f"weight must be finite, got {x}")
    return int(np.float16(x).view(np.uint16))


def dequantize_weight16(code: int) -> float:
    """Exact value of a 16-bit half-precision pattern."""
    if not (0 <= code <= 0xFFFF):
        raise ValueError(f"code must fit in 16 bits, got {code}")
    return float(np.uint16(code).view(np.float16))


@dataclass(frozen=True)
class BitReport:
    """Payload cost of one encoded image, excluding headers and padding.

    b_c_naive: index-plane bits at fixed width; b_c_compressed: stored plane
    bits after the deflate post-pass (None when not applied); b_w: weight
    section bits; B: total payload, using the compressed plane count when
    present; bpp: B over pixel count.
    """

    b_c_naive: int
    b_c_compressed: int | None
    b_w: int
    B: int
    bpp: float


def bit_report(
    u: int,
    v: int,
    K: int,
    sizes,
    mode: Mode,
    m: int,
    width: int,
    height: int,
    compressed_c: int | None = None,
) -> BitReport:
    """Bit cost of the index planes and weight section.

    Indices cost u*v*floor(log2 n_k) bits per book. Masked weights cost
    u*v*(16 + floor(log2 K))*m bits; single-book selection costs
    u*v*floor(log2 K) bits total.
    """
    sizes = tuple(sizes)
    if K != len(sizes):
        raise ValueError(f"K={K} but {len(sizes)} codebook sizes given")
    if mode == Mode.MASKED and not (1 <= m <= K):
        raise ValueError(f"m must be in [1, {K}], got {m}")
    if compressed_c is not None and compressed_c < 0:
        raise ValueError(f"compressed bit count must be >= 0, got {compressed_c}")
    cells = u * v
    b_c_naive = cells * sum(floor_log2(n_k) for n_k in sizes)
    if mode == Mode.MASKED:
        b_w = cells * (WEIGHT_FIELD_BITS + floor_log2(K)) * m
    else:
        b_w = cells * floor_log2(K)
    B = (b_c_naive if compressed_c is None else compressed_c) + b_w
    return BitReport(b_c_naive, compressed_c, b_w, B, B / (width * height))


def compress_index_planes(planes) -> bytes:
    """Deflate the planes' indices, byte-serialized per plane as all low
    bytes then all high bytes (row-major within each). Splitting the byte
    planes keeps the mostly-small high bytes in one run, which deflate
    compresses far better than interleaved 16-bit values. Lossless; the
    compressed byte length times 8 is the stored plane cost."""
    planes = tuple(planes)
    if not planes:
        raise ValueError("at least one index plane required")
    shapes = {(p.u, p.v) for p in planes}
    if len(shapes) != 1:
        raise ValueError(f"index planes disagree on grid shape: {sorted(shapes)}")
    parts = []
    for plane in planes:
        flat = plane.indices.ravel()
        if flat.size and flat.max() >= 1 << 16:
            raise ValueError("plane compression supports indices below 2^16 only")
        parts.append((flat & 0xFF).astype(np.uint8).tobytes())
        parts.append((flat >> 8).astype(np.uint8).tobytes())
    return zlib.compress(b"".join(parts), 9)


def decompress_index_planes(blob: bytes, u: int, v: int, K: int) -> tuple[IndexPlane, ...]:
    """Inverse of :func:`compress_index_planes` for a known grid geometry."""
    try:
        raw = zlib.decompress(blob)
    except zlib.error as exc:
        raise CorruptStreamError(f"compressed plane section damaged: {exc}") from exc
    if len(raw) != K * u * v * 2:
        raise CorruptStreamError(
            f"compressed plane section holds {len(raw)} bytes, expected {K * u * v * 2}"
        )
    per = u * v
    bytes_all = np.frombuffer(raw, dtype=np.uint8).astype(np.int64).reshape(K, 2, per)
    flat = bytes_all[:, 0, :] | (bytes_all[:, 1, :] << 8)
    return tuple(IndexPlane(flat[k].reshape(u, v)) for k in range(K))


@dataclass(frozen=True, eq=False)
class EncodedImage:
    """Everything the decoder needs: geometry, per-book index planes, the
    sparse weight set, and whether planes travel deflated."""

    width: int
    height: int
    channels: int
    patch_size: int
    transform: Transform
    mode: Mode
    m: int
    sizes: tuple[int, ...]
    compress_indices: bool
    planes: tuple[IndexPlane, ...]
    masked: MaskedWeights

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "planes", tuple(self.planes))
        if len(self.planes) != len(self.sizes):
            raise ValueError(f"{len(self.planes)} planes but {len(self.sizes)} codebook sizes")
        if not _is_power_of_two(len(self.planes)):
            raise ValueError(f"plane count must be a power of two, got {len(self.planes)}")
        shapes = {(p.u, p.v) for p in self.planes}
        if len(shapes) != 1:
            raise ValueError(f"index planes disagree on grid shape: {sorted(shapes)}")
        for plane, n_k in zip(self.planes, self.sizes):
            if plane.indices.size and plane.indices.max() >= n_k:
                raise ValueError(f"plane index {int(plane.indices.max())} out of range for codebook size {n_k}")
        if (self.masked.u, self.masked.v) != (self.planes[0].u, self.planes[0].v):
            raise ValueError("weight grid does not match index plane grid")
        if self.masked.indices.size and self.masked.indices.max() >= self.K:
            raise ValueError("masked weight references a book beyond K")
        if self.mode == Mode.MASKED and self.masked.m != self.m:
            raise ValueError(f"mode keeps m={self.m} books but weights carry {self.masked.m}")
        if self.mode == Mode.SINGLE and self.masked.m != 1:
            raise ValueError("single mode carries exactly one book per super-pixel")

    @property
    def u(self) -> int:
        return self.planes[0].u

    @property
    def v(self) -> int:
        return self.planes[0].v

    @property
    def K(self) -> int:
        return len(self.planes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedImage):
            return NotImplemented
        return (
            (self.width, self.height, self.channels, self.patch_size, self.transform,
             self.mode, self.m, self.sizes, self.compress_indices)
            == (other.width, other.height, other.channels, other.patch_size, other.transform,
                other.mode, other.m, other.sizes, other.compress_indices)
            and self.planes == other.planes
            and self.masked == other.masked
        )


@dataclass(frozen=True)
class StreamAccounting:
    """Where every bit of a serialized stream went. For an uncompressed
    stream, header + index + weight + pad equals the byte length times 8, and
    index + weight is the meaningful payload the formulas predict."""

    header_bits: int
    index_bits: int
    weight_bits: int
    pad_bits: int
    stream_bytes: int


def _check_u8(name: str, value: int) -> int:
    if not (0 <= value <= 0xFF):
        raise ValueError(f"{name}={value} does not fit in a byte")
    return value


def _weight_fields(enc: EncodedImage) -> tuple[np.ndarray, int]:
    """The weight section as equal-width integers: in masked mode each pair is
    the book index in the high bits and the half-precision pattern in the low
    16; in single mode just the book index."""
    book_bits = floor_log2(enc.K)
    if enc.mode == Mode.MASKED:
        idx = enc.masked.indices.ravel().astype(np.uint64)
        codes = enc.masked.values.ravel().astype(np.float16).view(np.uint16).astype(np.uint64)
        return ((idx << WEIGHT_FIELD_BITS) | codes).astype(np.int64), book_bits + WEIGHT_FIELD_BITS
    return enc.masked.indices.ravel(), book_bits


def serialize_counted(enc: EncodedImage) -> tuple[bytes, StreamAccounting]:
    """Serialize and report the exact bit budget of each stream section."""
    for n_k in enc.sizes:
        if not _is_power_of_two(n_k):
            raise ValueError(f"stream format requires power-of-two codebook sizes, got {n_k}")
    if enc.width >= 1 << 32 or enc.height >= 1 << 32:
        raise ValueError("image dimensions exceed the format limit")
    header = bytearray()
    header += STREAM_MAGIC
    header += struct.pack(
        _HEADER_FMT,
        STREAM_VERSION,
        enc.width,
        enc.height,
        _check_u8("channels", enc.channels),
        _check_u8("patch size", enc.patch_size),
        _check_u8("transform", int(enc.transform)),
        _check_u8("mode", int(enc.mode)),
        _check_u8("m", enc.m if enc.mode == Mode.MASKED else 1),
        _check_u8("K", enc.K),
    )
    header += bytes(floor_log2(n_k) for n_k in enc.sizes)
    header_bits = len(header) * 8 + 8  # header fields plus the compression flag

    if enc.compress_indices:
        blob = compress_index_planes(enc.planes)
        plane_section = struct.pack("<BI", 1, len(blob)) + blob
        header_bits += 32  # the length field
        index_bits = len(blob) * 8
        plane_pad = 0
    else:
        plane_writer = BitWriter()
        for plane, n_k in zip(enc.planes, enc.sizes):
            plane_writer.write_array(plane.indices.ravel(), floor_log2(n_k))
        plane_pad = plane_writer.pad_to_byte()
        plane_section = b"\x00" + plane_writer.getvalue()
        index_bits = plane_writer.bits_written

    weight_writer = BitWriter()
    fields, field_width = _weight_fields(enc)
    weight_writer.write_array(fields, field_width)
    weight_pad = weight_writer.pad_to_byte()

    data = bytes(header) + plane_section + weight_writer.getvalue()
    counts = StreamAccounting(
        header_bits=header_bits,
        index_bits=index_bits,
        weight_bits=weight_writer.bits_written,
        pad_bits=plane_pad + weight_pad,
        stream_bytes=len(data),
    )
    return data, counts


def serialize(enc: EncodedImage) -> bytes:
    return serialize_counted(enc)[0]


def deserialize(data: bytes) -> EncodedImage:
    """Parse a serialized stream back into its :class:`EncodedImage`."""
    if data[:4] != STREAM_MAGIC:
        raise NotABitstreamError("missing stream magic")
    try:
        version, width, height, channels, patch, transform_code, mode_code, m, K = struct.unpack_from(
            _HEADER_FMT, data, 4
        )
    except struct.error as exc:
        raise CorruptStreamError("stream header truncated") from exc
    if version != STREAM_VERSION:
        raise UnsupportedVersionError(f"stream version {version} not supported")
    offset = 4 + struct.calcsize(_HEADER_FMT)
    if len(data) < offset + K + 1:
        raise CorruptStreamError("stream header truncated")
    index_widths = list(data[offset : offset + K])
    offset += K
    try:
        transform = Transform(transform_code)
        mode = Mode(mode_code)
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from exc
    if width < 1 or height < 1 or channels < 1 or patch < 1 or K < 1:
        raise CorruptStreamError("stream header carries impossible geometry")
    if mode == Mode.MASKED and not (1 <= m <= K):
        raise CorruptStreamError(f"masked mode with m={m} outside [1, {K}]")
    if mode == Mode.SINGLE and m != 1:
        raise CorruptStreamError(f"single mode must carry m=1, got {m}")

    u = -(-height // patch)
    v = -(-width // patch)
    cells = u * v

    flag = data[offset]
    offset += 1
    if flag == 1:
        try:
            (length,) = struct.unpack_from("<I", data, offset)
        except struct.error as exc:
            raise CorruptStreamError("compressed section length truncated") from exc
        offset += 4
        blob = data[offset : offset + length]
        if len(blob) < length:
            raise CorruptStreamError("compressed section truncated")
        offset += length
        planes = decompress_index_planes(blob, u, v, K)
    elif flag == 0:
        reader = BitReader(data, offset)
        planes = tuple(IndexPlane(reader.read_array(cells, bits).reshape(u, v)) for bits in index_widths)
        reader.align_to_byte()
        offset = reader.byte_offset
    else:
        raise CorruptStreamError(f"unknown compression flag {flag}")

    weight_reader = BitReader(data, offset)
    book_bits = floor_log2(K)
    if mode == Mode.MASKED:
        pairs = weight_reader.read_array(cells * m, book_bits + WEIGHT_FIELD_BITS)
        indices = (pairs >> WEIGHT_FIELD_BITS).reshape(u, v, m)
        codes = (pairs & 0xFFFF).astype(np.uint16)
        values = codes.view(np.float16).astype(np.float64).reshape(u, v, m)
        kept = m
    else:
        indices = weight_reader.read_array(cells, book_bits).reshape(u, v, 1)
        values = np.ones(indices.shape, dtype=np.float64)
        kept = 1
    weight_reader.align_to_byte()
    if weight_reader.byte_offset != len(data):
        raise CorruptStreamError("trailing bytes after stream payload")

    try:
        return EncodedImage(
            width=width,
            height=height,
            channels=channels,
            patch_size=patch,
            transform=transform,
            mode=mode,
            m=kept,
            sizes=tuple(1 << bits for bits in index_widths),
            compress_indices=flag == 1,
            planes=planes,
            masked=MaskedWeights(indices, values),
        )
    except ValueError as exc:
        # e.g. a damaged weight field decoding to NaN or a non-monotone pair order
        raise CorruptStreamError(f"stream fields inconsistent: {exc}") from exc
