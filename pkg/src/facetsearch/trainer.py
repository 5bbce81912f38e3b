"""Adapter training on in-batch negatives.

The objective scores every query in a batch against every product in the
batch; each row's diagonal entry is the positive pair and the rest are
negatives, giving a softmax cross-entropy per row. Batches never repeat a
product or a query text, so no negative is secretly a positive. The
trainable parameters are a single square matrix applied to the fixed hash
embeddings; plain gradient descent keeps runs reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .catalog import CatalogTable, ProductRecord, clean_text, merge_product_text
from .embedder import DEFAULT_DIM, AdapterParams, hash_embed
from .errors import EmptyTrainingSet, MissingAsin, NonSquare

_ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class TrainingPair:
    query: str
    product_id: int


@dataclass(frozen=True)
class TrainingBatch:
    pairs: tuple[TrainingPair, ...]

    def __post_init__(self):
        queries = [p.query for p in self.pairs]
        products = [p.product_id for p in self.pairs]
        if len(set(queries)) != len(queries):
            raise ValueError("batch repeats a query text")
        if len(set(products)) != len(products):
            raise ValueError("batch repeats a product id")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.05
    epochs: int = 10
    rng_seed: int = 0
    temperature: float = 20.0
    dim: int = DEFAULT_DIM

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


# ---------------------------------------------------------------------------
# Synthetic queries

_STYLE_NAME = 0
_STYLE_FEATURE = 1
_STYLE_BENEFIT = 2
_STYLE_PLAIN = 3


def _record_tokens(record: ProductRecord) -> tuple[list[str], list[str]]:
    title = clean_text(record.title).split()
    if not title:
        title = clean_text(record.asin).split() or ["item"]
    pool = merge_product_text(record).split()
    if not pool:
        pool = list(title)
    return title, pool


def _span(tokens: list[str], rng: random.Random, max_len: int) -> str:
    start = rng.randrange(len(tokens))
    length = rng.randint(1, min(max_len, len(tokens) - start))
    return " ".join(tokens[start : start + length])


def synth_queries(record: ProductRecord, n: int, seed: int = 0) -> list[str]:
    """Generate n distinct queries from the record's own token content.

    Four styles rotate: a span of the title, a feature-need sentence, a
    benefit question, and a bare modifier+noun lookup. Every query contains
    at least one title token. Deterministic given the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    title, pool = _record_tokens(record)
    rng = random.Random(seed)
    out: list[str] = []
    seen: set[str] = set()

    def emit(q: str) -> None:
        if q and q not in seen:
            seen.add(q)
            out.append(q)

    emit(" ".join(title))
    attempts = 0
    limit = 40 + 24 * n
    while len(out) < n and attempts < limit:
        style = attempts % 4
        noun = rng.choice(title)
        if style == _STYLE_NAME:
            emit(_span(title, rng, max_len=len(title)))
        elif style == _STYLE_FEATURE:
            emit(f"i am looking for a {noun} with {_span(pool, rng, max_len=4)}")
        elif style == _STYLE_BENEFIT:
            emit(f"best {noun} for {_span(pool, rng, max_len=2)}")
        else:
            emit(f"{rng.choice(pool)} {noun}")
        attempts += 1
    repeat = 2
    while len(out) < n:
        # Degenerate token pools exhaust the templates; repetition keeps
        # queries distinct while still drawn from the record's tokens.
        emit(" ".join(title * repeat))
        repeat += 1
    return out


def synthesize_pairs(
    catalog: CatalogTable, per_product: int, seed: int = 0
) -> list[TrainingPair]:
    """One set of synthetic queries for every record, paired to its id."""
    pairs = []
    for product_id, record in enumerate(catalog):
        queries = synth_queries(record, per_product, seed=seed * 1_000_003 + product_id)
        pairs.extend(TrainingPair(query=q, product_id=product_id) for q in queries)
    return pairs


# ---------------------------------------------------------------------------
# Batching

def make_batches(
    pairs: Sequence[TrainingPair], batch_size: int, seed: int = 0
) -> list[TrainingBatch]:
    """Shuffle and greedily pack batches with no repeated query or product.

    A pair conflicting with the batch being filled is deferred to a later
    batch. Rounds that end with fewer than two pairs are dropped: a
    single-row score matrix has no negatives to rank against.
    """
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    rng = np.random.default_rng(seed)
    pending = [pairs[i] for i in rng.permutation(len(pairs))]
    batches: list[TrainingBatch] = []
    while pending:
        taken: list[int] = []
        queries: set[str] = set()
        products: set[int] = set()
        for i, pair in enumerate(pending):
            if len(taken) == batch_size:
                break
            if pair.query in queries or pair.product_id in products:
                continue
            taken.append(i)
            queries.add(pair.query)
            products.add(pair.product_id)
        if len(taken) >= 2:
            batches.append(TrainingBatch(tuple(pending[i] for i in taken)))
        taken_set = set(taken)
        pending = [p for i, p in enumerate(pending) if i not in taken_set]
        if not taken_set:  # pragma: no cover - cannot happen; first pair always fits
            break
    return batches


# ---------------------------------------------------------------------------
# Loss and gradient

def _check_square(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise NonSquare(f"score matrix must be square and non-empty, got shape {s.shape}")
    return s


def mnrl_loss(scores) -> float:
    """Mean negative log-likelihood of the diagonal under row softmax.

    Computed with max-subtracted log-sum-exp for stability.
    """
    s = _check_square(scores)
    m = s.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.sum(np.exp(s - m), axis=1))
    return float(-np.mean(np.diagonal(s) - lse))


def mnrl_grad(scores) -> np.ndarray:
    """d loss / d scores: (softmax(row) - identity) / K. Rows sum to zero."""
    s = _check_square(scores)
    k = s.shape[0]
    m = s.max(axis=1, keepdims=True)
    e = np.exp(s - m)
    softmax = e / e.sum(axis=1, keepdims=True)
    return (softmax - np.eye(k)) / k


def _normalize_rows(w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    degenerate = norms[:, 0] < _ZERO_NORM_EPS
    safe = np.where(norms < _ZERO_NORM_EPS, 1.0, norms)
    return w / safe, safe, degenerate


def _batch_loss_and_grad(
    matrix: np.ndarray, x: np.ndarray, y: np.ndarray, temperature: float
) -> tuple[float, np.ndarray]:
    """Loss and d loss / d matrix for one batch of base embeddings.

    Rows of x are query embeddings, rows of y the paired product
    embeddings. Scores are temperature * <normalize(Mx), normalize(My)>.
    Rows whose image under M is numerically zero fall back to the raw
    embedding and contribute no gradient.
    """
    wx = x @ matrix.T
    wy = y @ matrix.T
    u, nx, dx = _normalize_rows(wx)
    v, ny, dy = _normalize_rows(wy)
    if dx.any():
        u[dx] = x[dx]
    if dy.any():
        v[dy] = y[dy]

    scores = temperature * (u @ v.T)
    loss = mnrl_loss(scores)
    g = mnrl_grad(scores)

    gu = temperature * (g @ v)
    gv = temperature * (g.T @ u)
    # Through row normalization: project out the radial component.
    gwx = (gu - np.sum(gu * u, axis=1, keepdims=True) * u) / nx
    gwy = (gv - np.sum(gv * v, axis=1, keepdims=True) * v) / ny
    if dx.any():
        gwx[dx] = 0.0
    if dy.any():
        gwy[dy] = 0.0
    grad = gwx.T @ x + gwy.T @ y
    return loss, grad


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class TrainResult:
    params: AdapterParams
    epoch_losses: list[float] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)


def train_adapter(
    catalog: CatalogTable, pairs: Sequence[TrainingPair], config: TrainConfig
) -> TrainResult:
    """Fit the adapter matrix by gradient descent; identity start.

    Deterministic given config.rng_seed: each epoch reshuffles with a seed
    derived from it, so pairs dropped in one epoch get new chances later.
    """
    if not pairs:
        raise EmptyTrainingSet("no training pairs")
    config.validate()
    for p in pairs:
        if not 0 <= p.product_id < len(catalog):
            raise ValueError(f"product id {p.product_id} outside catalog of {len(catalog)}")

    query_vecs = {
        q: hash_embed(clean_text(q), config.dim) for q in {p.query for p in pairs}
    }
    product_vecs = {
        pid: hash_embed(merge_product_text(catalog[pid]), config.dim)
        for pid in {p.product_id for p in pairs}
    }

    matrix = np.eye(config.dim)
    result = TrainResult(params=AdapterParams(np.eye(config.dim)))
    for epoch in range(config.epochs):
        batches = make_batches(pairs, config.batch_size, seed=config.rng_seed * 1_000_003 + epoch)
        if not batches:
            raise EmptyTrainingSet("no batch with >= 2 conflict-free pairs")
        epoch_losses = []
        for batch in batches:
            x = np.stack([query_vecs[p.query] for p in batch.pairs])
            y = np.stack([product_vecs[p.product_id] for p in batch.pairs])
            loss, grad = _batch_loss_and_grad(matrix, x, y, config.temperature)
            epoch_losses.append(loss)
            result.batch_losses.append(loss)
            if config.learning_rate:
                matrix = matrix - config.learning_rate * grad
        result.epoch_losses.append(float(np.mean(epoch_losses)))
    result.params = AdapterParams(matrix)
    return result


# ---------------------------------------------------------------------------
# Pairs file: one "query<TAB>asin" per line.

def load_pairs(path: str | Path, catalog: CatalogTable) -> list[TrainingPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            query, sep, asin = line.partition("\t")
            if not sep or not query or not asin:
                raise ValueError(f"expected 'query<TAB>asin', got {line!r}")
            if not catalog.has_asin(asin):
                raise MissingAsin(asin)
            pairs.append(TrainingPair(query=query, product_id=catalog.id_for_asin(asin)))
    return pairs


def save_pairs(pairs: Sequence[TrainingPair], catalog: CatalogTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.query}\t{catalog[p.product_id].asin}\n")
