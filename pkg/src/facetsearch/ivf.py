"""Inverted-file flat vector index with inner-product search and ID filtering.

A k-means coarse quantizer partitions the vectors into nlist lists; a query
visits the nprobe lists whose centroids score highest by inner product and
ranks the (optionally ID-restricted) vectors found there. Stored vectors are
raw float32 (no compression), so searching every list is exact. The index is
immutable after build; exact_search is the brute-force oracle with identical
scoring and tie-break.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, BinaryIO, NamedTuple, Optional, Sequence

import numpy as np

from .embedder import HASH_SCHEME_VERSION
from .errors import (
    CorruptFile,
    DimensionMismatch,
    DuplicateId,
    NprobeOutOfRange,
    TooFewVectors,
    VersionMismatch,
)

DEFAULT_KMEANS_ITERS = 25


def default_nlist(n: int) -> int:
    """Square-root partition-count heuristic, clamped to [1, 4096]."""
    if n <= 1:
        return 1
    root = math.isqrt(n)
    if root * root < n:
        root += 1
    return min(4096, root)


def default_nprobe(nlist: int) -> int:
    return max(1, math.ceil(nlist / 8))


@dataclass(frozen=True)
class Centroids:
    """Coarse quantizer: nlist centroid vectors (rows)."""

    vectors: np.ndarray

    @property
    def nlist(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 expanded; clamped at zero against rounding.
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = _pairwise_sq_dists(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = points[idx]
        closest = np.minimum(closest, _pairwise_sq_dists(points, centers[j : j + 1])[:, 0])
    return centers


def train_centroids(
    vectors: Sequence[np.ndarray] | np.ndarray,
    nlist: int,
    seed: int = 0,
    max_iters: int = DEFAULT_KMEANS_ITERS,
) -> Centroids:
    """Lloyd's k-means with k-means++ seeding; deterministic given seed.

    Assignment is Euclidean. An empty cluster is re-seeded from the point
    currently farthest from its assigned centroid. Stops when assignments
    are stable or after max_iters.
    """
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("training vectors must be a 2-d array")
    n = points.shape[0]
    if n < nlist:
        raise TooFewVectors(nlist, n)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(points, nlist, rng)

    prev_assign: Optional[np.ndarray] = None
    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(points, centers)
        assign = np.argmin(d2, axis=1)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign

        counts = np.bincount(assign, minlength=nlist)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, points)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]

        empties = np.flatnonzero(~nonempty)
        if empties.size:
            dist_to_own = d2[np.arange(n), assign]
            order = np.argsort(-dist_to_own, kind="stable")
            for cluster, point_idx in zip(empties, order[: empties.size]):
                centers[cluster] = points[point_idx]
    return Centroids(vectors=centers)


class Hit(NamedTuple):
    id: int
    score: float


@dataclass(frozen=True)
class QueryResult:
    """Ranked hits, descending score, ties broken by ascending id."""

    hits: tuple[Hit, ...]

    def ids(self) -> list[int]:
        return [h.id for h in self.hits]


@dataclass(frozen=True)
class SearchRequest:
    query_vector: np.ndarray
    k: int = 10
    nprobe: int = 1
    allowed_ids: Optional[AbstractSet[int]] = None


class IvfIndex:
    """Immutable IVF-Flat index over float32 vectors."""

    def __init__(
        self,
        centroids_f32: np.ndarray,
        list_ids: list[np.ndarray],
        list_vectors: list[np.ndarray],
        scheme_version: int,
    ):
        self._centroids = centroids_f32
        self._list_ids = list_ids
        self._list_vectors = list_vectors
        self.scheme_version = scheme_version
        self.total_count = int(sum(len(ids) for ids in list_ids))

    @property
    def d(self) -> int:
        return self._centroids.shape[1]

    @property
    def nlist(self) -> int:
        return self._centroids.shape[0]

    @property
    def centroids(self) -> np.ndarray:
        return self._centroids

    def list_sizes(self) -> list[int]:
        return [len(ids) for ids in self._list_ids]

    def all_ids(self) -> np.ndarray:
        if not self._list_ids:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self._list_ids)


def build_index(
    vectors: np.ndarray,
    ids: Sequence[int],
    centroids: Centroids,
    scheme_version: int = HASH_SCHEME_VERSION,
) -> IvfIndex:
    """Route each vector to its best centroid by inner product."""
    vecs = np.asarray(vectors, dtype=np.float32).reshape(len(ids), centroids.dim)
    id_arr = np.asarray(ids, dtype=np.int64)
    if len(set(id_arr.tolist())) != len(id_arr):
        values, counts = np.unique(id_arr, return_counts=True)
        raise DuplicateId(int(values[counts > 1][0]))
    cents = np.ascontiguousarray(centroids.vectors, dtype=np.float32)
    if vecs.shape[0] and vecs.shape[1] != cents.shape[1]:
        raise DimensionMismatch(cents.shape[1], vecs.shape[1])

    nlist = cents.shape[0]
    if vecs.shape[0]:
        assign = np.argmax(vecs @ cents.T, axis=1)
    else:
        assign = np.empty(0, dtype=np.int64)
    list_ids: list[np.ndarray] = []
    list_vectors: list[np.ndarray] = []
    for c in range(nlist):
        members = np.flatnonzero(assign == c)
        list_ids.append(np.ascontiguousarray(id_arr[members]))
        list_vectors.append(np.ascontiguousarray(vecs[members]))
    return IvfIndex(cents, list_ids, list_vectors, scheme_version)


def _top_k(cand_ids: np.ndarray, cand_scores: np.ndarray, k: int) -> QueryResult:
    order = np.lexsort((cand_ids, -cand_scores))[:k]
    hits = tuple(Hit(int(cand_ids[i]), float(cand_scores[i])) for i in order)
    return QueryResult(hits=hits)


def _allowed_mask(ids: np.ndarray, allowed: Optional[AbstractSet[int]]) -> Optional[np.ndarray]:
    if allowed is None:
        return None
    return np.fromiter((int(i) in allowed for i in ids), dtype=bool, count=len(ids))


def search(index: IvfIndex, req: SearchRequest) -> QueryResult:
    """Probe the nprobe best lists and rank allowed vectors by inner product."""
    if req.k < 1:
        raise ValueError(f"k must be >= 1, got {req.k}")
    if not 1 <= req.nprobe <= index.nlist:
        raise NprobeOutOfRange(req.nprobe, index.nlist)
    q = np.asarray(req.query_vector, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.d:
        raise DimensionMismatch(index.d, q.shape[0])

    probe_scores = index._centroids @ q
    probe_order = np.lexsort((np.arange(index.nlist), -probe_scores))[: req.nprobe]

    ids_parts: list[np.ndarray] = []
    score_parts: list[np.ndarray] = []
    for c in probe_order:
        ids = index._list_ids[c]
        if not len(ids):
            continue
        vecs = index._list_vectors[c]
        mask = _allowed_mask(ids, req.allowed_ids)
        if mask is not None:
            if not mask.any():
                continue
            ids = ids[mask]
            vecs = vecs[mask]
        ids_parts.append(ids)
        score_parts.append(vecs @ q)
    if not ids_parts:
        return QueryResult(hits=())
    return _top_k(np.concatenate(ids_parts), np.concatenate(score_parts), req.k)


def exact_search(
    vectors: np.ndarray,
    ids: Sequence[int],
    query: np.ndarray,
    k: int,
    allowed_ids: Optional[AbstractSet[int]] = None,
) -> QueryResult:
    """Full scan over all vectors; the oracle search agrees with at full probe."""
    vecs = np.asarray(vectors, dtype=np.float32)
    id_arr = np.asarray(ids, dtype=np.int64)
    q = np.asarray(query, dtype=np.float32).reshape(-1)
    if vecs.shape[0] and vecs.shape[1] != q.shape[0]:
        raise DimensionMismatch(q.shape[0], vecs.shape[1])
    mask = _allowed_mask(id_arr, allowed_ids)
    if mask is not None:
        id_arr = id_arr[mask]
        vecs = vecs[mask]
    if not len(id_arr):
        return QueryResult(hits=())
    return _top_k(id_arr, vecs @ q, k)


# ---------------------------------------------------------------------------
# Persistence: magic | format version | scheme | d | nlist | total, then
# centroids (float32), then per list: count | ids (int64) | vectors (float32).

_IDX_MAGIC = b"FSIX"
_IDX_FORMAT_VERSION = 1
_IDX_HEADER = struct.Struct("<4sIIIIQ")


def _read_exactly(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptFile(f"truncated while reading {what}")
    return data


def save_index(index: IvfIndex, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _IDX_HEADER.pack(
                _IDX_MAGIC,
                _IDX_FORMAT_VERSION,
                index.scheme_version,
                index.d,
                index.nlist,
                index.total_count,
            )
        )
        fh.write(np.ascontiguousarray(index._centroids, dtype="<f4").tobytes())
        for ids, vecs in zip(index._list_ids, index._list_vectors):
            fh.write(struct.pack("<Q", len(ids)))
            fh.write(np.ascontiguousarray(ids, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(vecs, dtype="<f4").tobytes())


def load_index(path: str | Path) -> IvfIndex:
    with open(path, "rb") as fh:
        header = _read_exactly(fh, _IDX_HEADER.size, "header")
        magic, fmt, scheme, d, nlist, total = _IDX_HEADER.unpack(header)
        if magic != _IDX_MAGIC:
            raise CorruptFile(f"bad magic {magic!r}")
        if fmt != _IDX_FORMAT_VERSION:
            raise VersionMismatch(_IDX_FORMAT_VERSION, fmt)
        if d < 1 or nlist < 1:
            raise CorruptFile(f"implausible header: d={d}, nlist={nlist}")
        cents = np.frombuffer(
            _read_exactly(fh, 4 * nlist * d, "centroids"), dtype="<f4"
        ).reshape(nlist, d)
        list_ids: list[np.ndarray] = []
        list_vectors: list[np.ndarray] = []
        seen = 0
        for c in range(nlist):
            (count,) = struct.unpack("<Q", _read_exactly(fh, 8, f"list {c} size"))
            if count > total:
                raise CorruptFile(f"list {c} claims {count} vectors, total is {total}")
            ids = np.frombuffer(_read_exactly(fh, 8 * count, f"list {c} ids"), dtype="<i8")
            vecs = np.frombuffer(
                _read_exactly(fh, 4 * count * d, f"list {c} vectors"), dtype="<f4"
            ).reshape(count, d)
            list_ids.append(ids.copy())
            list_vectors.append(vecs.copy())
            seen += count
        if seen != total:
            raise CorruptFile(f"list sizes sum to {seen}, header says {total}")
        if fh.read(1):
            raise CorruptFile("trailing bytes after last list")
    index = IvfIndex(cents.copy(), list_ids, list_vectors, scheme)
    all_ids = index.all_ids()
    if len(np.unique(all_ids)) != len(all_ids):
        raise CorruptFile("duplicate ids across lists")
    return index
