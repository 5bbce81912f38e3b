"""Deterministic sample catalogs, vector corpora, and benchmarks.

Everything here is generated from a seed, so tests and demos get stable
data without shipping bulky fixture files. The decoy benchmark builds
queries whose wording names one product but whose constraints are violated
by a textually identical decoy with a lower ID, which makes the value of
metadata filtering directly measurable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .catalog import CatalogTable, ProductRecord, Subcategory
from .trainer import TrainingPair, synth_queries, synthesize_pairs


def clustered_vector_sample(
    n: int,
    n_queries: int,
    d: int = 256,
    n_clusters: int = 128,
    spread: float = 2.0,
    seed: int = 42,
) -> tuple[np.ndarray, np.ndarray]:
    """Random unit vectors drawn around shared cluster directions.

    Corpus and queries come from the same mixture, the way embedding
    corpora cluster in practice. spread scales the expected noise norm
    relative to the unit cluster direction.
    """
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    def draw(m: int) -> np.ndarray:
        assign = rng.integers(n_clusters, size=m)
        points = centers[assign] + rng.standard_normal((m, d)) * (spread / np.sqrt(d))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        return points.astype(np.float32)

    return draw(n), draw(n_queries)

_PHONE_BRANDS = (
    "samsung", "apple", "google", "motorola", "nokia",
    "huawei", "oneplus", "sony", "xiaomi", "asus",
)
_PHONE_LINES = (
    "galaxy", "pixel", "edge", "xperia", "nord", "zen", "prime", "ultra", "neo", "flip",
)
_PHONE_FEATURES = (
    "long lasting battery", "amoled display", "dual sim support", "fast processor",
    "expandable storage", "128gb storage", "5000mah battery", "6.1 inch screen",
    "triple camera", "face unlock", "5g connectivity", "stereo speakers",
)
_ACCESSORY_BRANDS = (
    "anker", "spigen", "belkin", "otterbox", "ugreen",
    "aukey", "moshi", "zagg", "jetech", "ringke",
)
_ACCESSORY_TYPES = (
    "case", "charger", "cable", "screen protector", "holder",
    "mount", "battery", "band", "earbuds", "adapter",
)
_ADJECTIVES = (
    "slim", "rugged", "clear", "durable", "lightweight",
    "magnetic", "foldable", "wireless", "compact", "portable",
)


def _code(i: int) -> str:
    # Letter-led unique model token; never looks like a parseable amount.
    return f"{'abcdefghijklmnopqrstuvwxyz'[i % 26]}{100 + i}"


def _phone_record(i: int, rng: random.Random, price) -> ProductRecord:
    brand = rng.choice(_PHONE_BRANDS)
    line = rng.choice(_PHONE_LINES)
    feats = rng.sample(_PHONE_FEATURES, 5)
    return ProductRecord(
        asin=f"BSAMP{i:05d}",
        title=f"{brand} {line} {_code(i)}",
        description=f"smartphone with {feats[0]} and {feats[1]}",
        features=f"{feats[2]}, {feats[3]}",
        tech_specs=f"model {_code(i)}, weight {120 + (i % 90)} g, {feats[4]}",
        price=price,
        average_rating=round(rng.uniform(3.0, 5.0), 1),
        review_count=int(10 ** rng.uniform(0.0, 3.7)),
        subcategory=Subcategory.CELL_PHONES,
    )


def _accessory_record(i: int, rng: random.Random, price) -> ProductRecord:
    brand = rng.choice(_ACCESSORY_BRANDS)
    kind = rng.choice(_ACCESSORY_TYPES)
    adj, adj2 = rng.sample(_ADJECTIVES, 2)
    target = f"{rng.choice(_PHONE_BRANDS)} {rng.choice(_PHONE_LINES)}"
    return ProductRecord(
        asin=f"BSAMP{i:05d}",
        title=f"{brand} {adj} {kind} for {target} {_code(i)}",
        description=f"protective gear designed for the {target}",
        features=f"{adj2} build, easy installation",
        tech_specs=f"model {_code(i)}, weight {20 + (i % 60)} g",
        price=price,
        average_rating=round(rng.uniform(3.0, 5.0), 1),
        review_count=int(10 ** rng.uniform(0.0, 3.7)),
        subcategory=Subcategory.CELL_PHONE_ACCESSORIES,
    )


def sample_catalog(n: int = 500, seed: int = 7) -> CatalogTable:
    """n synthetic products, roughly 40% phones. About 4% lack a price."""
    rng = random.Random(seed)
    records = []
    for i in range(n):
        is_phone = rng.random() < 0.4
        if rng.random() < 0.04:
            price = None
        elif is_phone:
            price = round(rng.uniform(60.0, 950.0), 2)
        else:
            price = round(rng.uniform(4.0, 70.0), 2)
        records.append(
            _phone_record(i, rng, price) if is_phone else _accessory_record(i, rng, price)
        )
    return CatalogTable(records)


@dataclass(frozen=True)
class TrainingSample:
    catalog: CatalogTable
    train_pairs: list[TrainingPair]
    eval_judgments: list[tuple[str, frozenset[str]]]


def training_sample(
    n: int = 500, seed: int = 11, per_product: int = 2, eval_every: int = 5
) -> TrainingSample:
    """Catalog plus a held-out query split.

    Training pairs cover every product; every eval_every-th product also
    gets one fresh query drawn with a different seed (and checked against
    the training set) so evaluation measures transfer to unseen phrasings.
    """
    catalog = sample_catalog(n, seed)
    train_pairs = []
    train_queries = set()
    for product_id, record in enumerate(catalog):
        for q in synth_queries(record, per_product, seed=seed * 1_000_003 + product_id):
            train_pairs.append(TrainingPair(query=q, product_id=product_id))
            train_queries.add(q)
    eval_judgments = []
    for product_id in range(0, len(catalog), eval_every):
        record = catalog[product_id]
        candidates = synth_queries(record, 8, seed=31 * 1_000_003 + product_id)
        # candidates[0] is always the verbatim title; skip it and anything
        # that happens to coincide with a training query.
        fresh = [q for q in candidates[1:] if q not in train_queries]
        eval_judgments.append((fresh[0], frozenset([record.asin])))
    return TrainingSample(catalog, train_pairs, eval_judgments)


# ---------------------------------------------------------------------------
# Decoy benchmark

_CONSTRAINT_KINDS = (
    "price_under",
    "price_over",
    "stars_plus",
    "reviews_plus",
    "price_between",
    "qual_rating",
    "qual_reviews",
)


@dataclass(frozen=True)
class DecoyBenchmark:
    catalog: CatalogTable
    judgments: list[tuple[str, frozenset[str]]]


def decoy_benchmark(
    n_queries: int = 40, n_fillers: int = 120, seed: int = 13
) -> DecoyBenchmark:
    """Catalog of (decoy, target) pairs plus fillers, with judged queries.

    Each query names a target's title and states one constraint the target
    meets. Its decoy shares all text fields and the subcategory, sits at a
    lower ID, and violates exactly that constraint, so unfiltered search
    ties the two and ranks the decoy first.
    """
    rng = random.Random(seed)
    records: list[ProductRecord] = []
    judgments: list[tuple[str, frozenset[str]]] = []

    for qi in range(n_queries):
        kind = _CONSTRAINT_KINDS[qi % len(_CONSTRAINT_KINDS)]
        i = 2 * qi
        is_phone = qi % 2 == 0
        make = _phone_record if is_phone else _accessory_record
        base_price = rng.uniform(150.0, 600.0) if is_phone else rng.uniform(10.0, 50.0)

        target = make(i + 1, rng, round(base_price, 2))
        decoy_fields = dict(
            title=target.title,
            description=target.description,
            features=target.features,
            tech_specs=target.tech_specs,
            subcategory=target.subcategory,
        )
        rating, reviews = target.average_rating, target.review_count
        d_price, d_rating, d_reviews = target.price, rating, reviews

        if kind == "price_under":
            limit = round(target.price + 25, 0)
            d_price = round(limit + 80, 2)
            query = f"{target.title} under ${limit:.0f}"
        elif kind == "price_over":
            limit = round(max(1.0, target.price - 25), 0)
            d_price = round(max(0.5, limit - min(limit * 0.8, 60)), 2)
            query = f"{target.title} over ${limit:.0f}"
        elif kind == "stars_plus":
            rating, d_rating = 4.7, 3.9
            query = f"{target.title} with 4.5+ stars"
        elif kind == "reviews_plus":
            reviews, d_reviews = 1500 + qi, 40
            query = f"{target.title} with 500+ reviews"
        elif kind == "price_between":
            lo = round(max(1.0, target.price - 15), 0)
            hi = round(target.price + 15, 0)
            d_price = round(hi + 90, 2)
            query = f"{target.title} between ${lo:.0f} and ${hi:.0f}"
        elif kind == "qual_rating":
            rating, d_rating = 4.8, 4.0
            query = f"highly rated {target.title}"
        else:  # qual_reviews
            reviews, d_reviews = 2500 + qi, 300
            query = f"{target.title} with plenty of reviews"

        target = ProductRecord(
            asin=f"BENCH{i + 1:05d}",
            price=target.price,
            average_rating=rating,
            review_count=reviews,
            **decoy_fields,
        )
        decoy = ProductRecord(
            asin=f"BENCH{i:05d}",
            price=d_price,
            average_rating=d_rating,
            review_count=d_reviews,
            **decoy_fields,
        )
        records.append(decoy)
        records.append(target)
        judgments.append((query, frozenset([target.asin])))

    base = 2 * n_queries
    for j in range(n_fillers):
        i = base + j
        is_phone = rng.random() < 0.5
        price = round(rng.uniform(60.0, 900.0) if is_phone else rng.uniform(4.0, 70.0), 2)
        rec = (_phone_record if is_phone else _accessory_record)(i, rng, price)
        records.append(rec)

    return DecoyBenchmark(CatalogTable(records), judgments)
