"""Basis codebooks: training by two-level k-means, exact nearest-codeword search,
index planes, and the shared codebook file format.

Distances are squared Euclidean throughout. Ties always break to the lowest
index, and every routine is deterministic given its seed: the same dataset and
seed produce bitwise-identical codebooks on repeated runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptStreamError, NotABitstreamError, UnsupportedVersionError
from .latent import LatentGrid, QuantizedGrid

CODEBOOK_MAGIC = b"MSVC"
CODEBOOK_VERSION = 1

LLOYD_MAX_ITER = 50


@dataclass(frozen=True)
class Codebook:
    """A set of codewords, shape (n_k, d)."""

    codewords: np.ndarray

    def __post_init__(self):
        cw = np.ascontiguousarray(np.asarray(self.codewords, dtype=np.float64))
        if cw.ndim != 2 or cw.shape[0] < 1:
            raise ValueError(f"codewords must be a non-empty (n, d) array, got shape {np.shape(self.codewords)}")
        if not np.all(np.isfinite(cw)):
            raise ValueError("codewords must be finite")
        object.__setattr__(self, "codewords", cw)

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]


@dataclass(frozen=True)
class BasisCodebooks:
    """An ordered list of K codebooks sharing one latent dimension."""

    books: tuple[Codebook, ...]

    def __post_init__(self):
        books = tuple(self.books)
        if not books:
            raise ValueError("at least one codebook required")
        if not _is_power_of_two(len(books)):
            raise ValueError(f"codebook count must be a power of two, got {len(books)}")
        dims = {b.dim for b in books}
        if len(dims) != 1:
            raise ValueError(f"codebooks disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "books", books)

    @property
    def K(self) -> int:
        return len(self.books)

    @property
    def dim(self) -> int:
        return self.books[0].dim

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.books)


@dataclass(frozen=True)
class IndexPlane:
    """Codeword indices for one codebook over the u x v grid."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        if idx.ndim != 2:
            raise ValueError(f"indices must have shape (u, v), got {np.shape(self.indices)}")
        if idx.min(initial=0) < 0:
            raise ValueError("indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    @property
    def u(self) -> int:
        return self.indices.shape[0]

    @property
    def v(self) -> int:
        return self.indices.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexPlane):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.indices.shape, self.indices.tobytes()))


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def sq_distances(points: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(points), len(codewords)).

    Uses the expanded |x|^2 - 2xy + |y|^2 form (one matmul), clipped at zero.
    """
    p2 = np.einsum("nd,nd->n", points, points)
    c2 = np.einsum("md,md->m", codewords, codewords)
    d2 = p2[:, np.newaxis] - 2.0 * (points @ codewords.T) + c2[np.newaxis, :]
    return np.maximum(d2, 0.0, out=d2)


def nearest_codeword(book: Codebook, y: np.ndarray) -> tuple[int, float]:
    """Index and squared distance of the codeword closest to y (ties: lowest index)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (book.dim,):
        raise ValueError(f"vector has dimension {y.shape}, codebook expects ({book.dim},)")
    d2 = sq_distances(y[np.newaxis, :], book.codewords)[0]
    idx = int(np.argmin(d2))
    return idx, float(d2[idx])


def nearest_indices(book: Codebook, grid: LatentGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-super-pixel nearest codeword indices and squared distances, shapes (u, v)."""
    if grid.d != book.dim:
        raise ValueError(f"grid dimension {grid.d} does not match codebook dimension {book.dim}")
    flat = grid.vectors.reshape(-1, grid.d)
    d2 = sq_distances(flat, book.codewords)
    idx = np.argmin(d2, axis=1)
    dist = d2[np.arange(len(flat)), idx]
    return idx.reshape(grid.u, grid.v), dist.reshape(grid.u, grid.v)


def quantize_plane(book: Codebook, grid: LatentGrid) -> IndexPlane:
    """Map every super-pixel to the index of its nearest codeword."""
    idx, _ = nearest_indices(book, grid)
    return IndexPlane(idx)


def retrieve_plane(book: Codebook, plane: IndexPlane) -> QuantizedGrid:
    """Look the indices back up into codeword vectors."""
    idx = plane.indices
    if idx.size and idx.max() >= book.size:
        raise CorruptStreamError(f"index {int(idx.max())} out of range for codebook of size {book.size}")
    return LatentGrid(book.codewords[idx])


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ initialization. Falls back to cycling points when the
    dataset has fewer distinct points than centers."""
    n = len(points)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    best = sq_distances(points, points[chosen[0]][np.newaxis, :])[:, 0]
    for i in range(1, k):
        total = best.sum()
        if total > 0.0:
            chosen[i] = rng.choice(n, p=best / total)
        else:
            # Remaining points coincide with a chosen center; cycle determinately.
            chosen[i] = (int(chosen[i - 1]) + 1) % n
        best = np.minimum(best, sq_distances(points, points[chosen[i]][np.newaxis, :])[:, 0])
    return points[chosen].copy()


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int = LLOYD_MAX_ITER) -> np.ndarray:
    """Lloyd iterations with the deterministic empty-cluster rule: an empty
    cluster is reseeded from the point currently farthest from its center."""
    k = len(centers)
    assign = np.full(len(points), -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = sq_distances(points, centers)
        new_assign = np.argmin(d2, axis=1)
        dist = d2[np.arange(len(points)), new_assign]
        counts = np.bincount(new_assign, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist))
            new_assign[far] = empty
            counts = np.bincount(new_assign, minlength=k)
            dist = dist.copy()
            dist[far] = -np.inf
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, points)
        centers = sums / np.bincount(assign, minlength=k)[:, np.newaxis]
    return centers


def _fit_codebook(points: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if len(points) <= n:
        # Degenerate partition: every point becomes a codeword, cycled to length n.
        reps = np.arange(n) % len(points)
        return points[reps].copy()
    centers = _kmeans_pp_init(points, n, rng)
    return _lloyd(points, centers)


def train_codebooks(patch_vectors: np.ndarray, K: int, n: int, seed: int) -> BasisCodebooks:
    """Fit K basis codebooks of n codewords each by two-level k-means.

    The dataset is first split into K coarse clusters (the stand-in for
    semantic classes); each cluster then gets its own k-means++/Lloyd
    codebook. Deterministic given `seed`.
    """
    pts = np.ascontiguousarray(np.asarray(patch_vectors, dtype=np.float64))
    if pts.ndim != 2:
        raise ValueError(f"patch_vectors must be (N, d), got shape {np.shape(patch_vectors)}")
    if not _is_power_of_two(K):
        raise ValueError(f"K must be a power of two, got {K}")
    if n < 1:
        raise ValueError(f"codebook size must be >= 1, got {n}")
    if len(pts) < K * n:
        raise ValueError(f"need at least K*n = {K * n} training vectors, got {len(pts)}")
    rng = np.random.default_rng(seed)
    if K == 1:
        partition = [pts]
    else:
        coarse = _lloyd(pts, _kmeans_pp_init(pts, K, rng))
        assign = np.argmin(sq_distances(pts, coarse), axis=1)
        partition = [pts[assign == k] for k in range(K)]
    books = []
    for members in partition:
        if len(members) == 0:
            members = pts  # coarse cluster emptied between lloyd and final assignment
        books.append(Codebook(_fit_codebook(members, n, rng)))
    return BasisCodebooks(tuple(books))


def save_codebooks(books: BasisCodebooks) -> bytes:
    """Serialize in the shared codebook format: magic, version, K (u16), d (u32),
    the K sizes (u32 each), then all codewords as little-endian float32."""
    out = [CODEBOOK_MAGIC, struct.pack("<BHI", CODEBOOK_VERSION, books.K, books.dim)]
    out.append(struct.pack(f"<{books.K}I", *books.sizes))
    for book in books.books:
        out.append(book.codewords.astype("<f4").tobytes())
    return b"".join(out)


def load_codebooks(data: bytes, offset: int = 0) -> tuple[BasisCodebooks, int]:
    """Inverse of :func:`save_codebooks`; returns the books and the end offset."""
    if data[offset : offset + 4] != CODEBOOK_MAGIC:
        raise NotABitstreamError("missing codebook magic")
    offset += 4
    try:
        version, K, dim = struct.unpack_from("<BHI", data, offset)
        offset += struct.calcsize("<BHI")
        if version != CODEBOOK_VERSION:
            raise UnsupportedVersionError(f"codebook format version {version} not supported")
        sizes = struct.unpack_from(f"<{K}I", data, offset)
        offset += 4 * K
        books = []
        for n_k in sizes:
            count = n_k * dim
            raw = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
            if raw.size < count:
                raise CorruptStreamError("codebook data truncated")
            offset += 4 * count
            books.append(Codebook(raw.astype(np.float64).reshape(n_k, dim)))
    except struct.error as exc:
        raise CorruptStreamError("codebook header truncated") from exc
    return BasisCodebooks(tuple(books)), offset
