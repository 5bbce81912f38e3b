"""Deterministic text embeddings and the trainable linear adapter.

Embeddings are signed feature hashes over whitespace tokens and adjacent
token bigrams, L2-normalized. The scheme needs no external models and is
stable across platforms (CRC-32 based), so the same text always maps to
the same vector. A square adapter matrix, fit by the trainer, reshapes
the space; applying it re-normalizes.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import CorruptFile, DimensionMismatch

# Bump when the token-to-coordinate mapping changes. Persisted in vector
# files and indexes; searching with a differently-versioned query embedding
# is rejected upstream.
HASH_SCHEME_VERSION = 1
# Scheme tag for vectors imported from an external model.
EXTERNAL_SCHEME = 0

DEFAULT_DIM = 256
MIN_DIM = 8

_ZERO_NORM_EPS = 1e-12

EmbeddingVector = np.ndarray


def _feature(token: str, d: int) -> tuple[int, float]:
    data = token.encode("utf-8")
    coord = zlib.crc32(data) % d
    sign = 1.0 if zlib.crc32(b"\x01" + data) & 1 else -1.0
    return coord, sign


def hash_embed(text: str, d: int = DEFAULT_DIM) -> EmbeddingVector:
    """Embed cleaned text into a unit vector of dimension d.

    Each whitespace token and each adjacent-token bigram hashes to one
    signed coordinate; contributions accumulate and the result is
    L2-normalized. Empty text returns the first basis vector.
    """
    if d < MIN_DIM:
        raise ValueError(f"dimension must be >= {MIN_DIM}, got {d}")
    v = np.zeros(d, dtype=np.float64)
    tokens = text.split()
    if not tokens:
        v[0] = 1.0
        return v
    for tok in tokens:
        coord, sign = _feature(tok, d)
        v[coord] += sign
    for left, right in zip(tokens, tokens[1:]):
        coord, sign = _feature(left + " " + right, d)
        v[coord] += sign
    return v / np.linalg.norm(v)


@dataclass
class AdapterParams:
    """Square matrix applied to base embeddings; trained by the trainer."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"adapter matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("adapter matrix entries must be finite")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d: int) -> "AdapterParams":
        return cls(np.eye(d))


def adapt(v: EmbeddingVector, params: AdapterParams) -> EmbeddingVector:
    """Apply the adapter and re-normalize; near-zero images fall back to v."""
    if v.shape[0] != params.dim:
        raise DimensionMismatch(params.dim, v.shape[0])
    w = params.matrix @ v
    norm = np.linalg.norm(w)
    if norm < _ZERO_NORM_EPS:
        return v.copy()
    return w / norm


def similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Inner product; in [-1, 1] for unit vectors."""
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(a.shape[0], b.shape[0])
    return float(np.dot(a, b))


# ---------------------------------------------------------------------------
# Vector file format: magic | version (= embedding scheme) | d | count,
# then `count` records of (id: int64 LE, d float32 LE values).

_VEC_MAGIC = b"FSVC"
_VEC_HEADER = struct.Struct("<4sIIQ")


@dataclass
class VectorSet:
    """Ids and unit vectors as parallel arrays, plus their scheme tag."""

    ids: np.ndarray  # int64, shape (n,)
    vectors: np.ndarray  # float32, shape (n, d)
    scheme_version: int = HASH_SCHEME_VERSION

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _read_exactly(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptFile(f"truncated while reading {what}")
    return data


def save_vectors(vs: VectorSet, path: str | Path) -> None:
    ids = np.ascontiguousarray(vs.ids, dtype="<i8")
    vectors = np.ascontiguousarray(vs.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_VEC_HEADER.pack(_VEC_MAGIC, vs.scheme_version, vectors.shape[1], len(ids)))
        for i in range(len(ids)):
            fh.write(ids[i].tobytes())
            fh.write(vectors[i].tobytes())


def load_vectors(path: str | Path, normalize: bool = True) -> VectorSet:
    """Read a vector file; non-unit rows are normalized unless disabled."""
    with open(path, "rb") as fh:
        header = _read_exactly(fh, _VEC_HEADER.size, "header")
        magic, scheme, d, count = _VEC_HEADER.unpack(header)
        if magic != _VEC_MAGIC:
            raise CorruptFile(f"bad magic {magic!r}")
        if d < MIN_DIM:
            raise CorruptFile(f"dimension {d} below minimum {MIN_DIM}")
        ids = np.empty(count, dtype=np.int64)
        vectors = np.empty((count, d), dtype=np.float32)
        record = struct.Struct(f"<q{d}f")
        for i in range(count):
            row = record.unpack(_read_exactly(fh, record.size, f"record {i}"))
            ids[i] = row[0]
            vectors[i] = row[1:]
        if fh.read(1):
            raise CorruptFile("trailing bytes after last record")
    if not np.all(np.isfinite(vectors)):
        raise CorruptFile("non-finite vector entries")
    if normalize:
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms < _ZERO_NORM_EPS):
            raise CorruptFile("zero-norm vector cannot be normalized")
        vectors = vectors / norms
    return VectorSet(ids=ids, vectors=vectors, scheme_version=scheme)


# ---------------------------------------------------------------------------
# Adapter file format: magic | version | d, then d*d float32 LE, row-major.

_ADAPTER_MAGIC = b"FSAD"
_ADAPTER_VERSION = 1
_ADAPTER_HEADER = struct.Struct("<4sII")


def save_adapter(params: AdapterParams, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_ADAPTER_HEADER.pack(_ADAPTER_MAGIC, _ADAPTER_VERSION, params.dim))
        fh.write(np.ascontiguousarray(params.matrix, dtype="<f4").tobytes())


def load_adapter(path: str | Path) -> AdapterParams:
    with open(path, "rb") as fh:
        header = _read_exactly(fh, _ADAPTER_HEADER.size, "adapter header")
        magic, version, d = _ADAPTER_HEADER.unpack(header)
        if magic != _ADAPTER_MAGIC:
            raise CorruptFile(f"bad magic {magic!r}")
        if version != _ADAPTER_VERSION:
            raise CorruptFile(f"unsupported adapter version {version}")
        body = _read_exactly(fh, 4 * d * d, "adapter matrix")
        if fh.read(1):
            raise CorruptFile("trailing bytes after adapter matrix")
    matrix = np.frombuffer(body, dtype="<f4").reshape(d, d).astype(np.float64)
    return AdapterParams(matrix)
