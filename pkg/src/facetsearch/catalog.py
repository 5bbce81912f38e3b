"""Product catalog loading, text cleaning, and subcategory classification.

A catalog is an ordered list of product records; the position of a record
is its integer ID, which is what the vector index stores. Text cleaning
normalizes every free-text field to lowercase printable ASCII with no
markup or URLs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import DuplicateAsin, MalformedRecord, OutOfRangeRating

# Documentation alias: a CleanText string is lowercase printable ASCII,
# single-spaced, with no markup tags or URL tokens. clean_text() is the
# only constructor and is idempotent.
CleanText = str


class Subcategory(Enum):
    CELL_PHONES = "Cell Phones"
    CELL_PHONE_ACCESSORIES = "Cell Phone Accessories"

    @classmethod
    def from_label(cls, label: str) -> "Subcategory":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown subcategory label: {label!r}")


@dataclass(frozen=True)
class ProductRecord:
    """One catalog item. Text fields may be empty; price may be unknown."""

    asin: str
    title: str = ""
    description: str = ""
    features: str = ""
    tech_specs: str = ""
    price: Optional[float] = None
    average_rating: float = 0.0
    review_count: int = 0
    subcategory: Subcategory = Subcategory.CELL_PHONES


_TAG_RE = re.compile(r"<[^>]*>")
_WS_RE = re.compile(r"\s+")


def _is_url_token(token: str) -> bool:
    # Scheme-prefix match, not URI parsing: a token is a URL if it carries
    # an http(s) scheme anywhere (so stripping stray characters around it
    # still catches it) or starts with "www.".
    return "http://" in token or "https://" in token or token.startswith("www.")


def clean_text(raw: str) -> CleanText:
    """Normalize free text to lowercase printable ASCII.

    Markup tags are dropped keeping their inner text, URL tokens are
    removed whole, characters outside the printable 7-bit range are
    deleted, and whitespace is collapsed. Idempotent and total.
    """
    s = _TAG_RE.sub(" ", raw)
    s = s.replace("<", " ").replace(">", " ")
    s = "".join(c for c in s if c.isspace() or 32 <= ord(c) < 127)
    s = s.lower()
    tokens = [t for t in s.split() if not _is_url_token(t)]
    return " ".join(tokens)


def merge_product_text(record: ProductRecord) -> CleanText:
    """Concatenate the cleaned text fields in fixed order."""
    parts = [
        clean_text(record.title),
        clean_text(record.description),
        clean_text(record.features),
        clean_text(record.tech_specs),
    ]
    return " ".join(p for p in parts if p)


# ---------------------------------------------------------------------------
# Accessory lexicon


def _load_accessory_lexicon() -> tuple[tuple[str, ...], tuple[str, ...]]:
    payload = json.loads(
        resources.files("facetsearch.data").joinpath("accessory_lexicon.json").read_text()
    )
    return tuple(payload["terms"]), tuple(payload.get("exclusions", ()))


_ACCESSORY_TERMS: Optional[tuple[str, ...]] = None
_ACCESSORY_RE: Optional[re.Pattern[str]] = None
_EXCLUSION_RE: Optional[re.Pattern[str]] = None


def accessory_terms() -> tuple[str, ...]:
    """The bundled accessory lexicon (lowercase words and phrases)."""
    global _ACCESSORY_TERMS
    if _ACCESSORY_TERMS is None:
        _ACCESSORY_TERMS = _load_accessory_lexicon()[0]
    return _ACCESSORY_TERMS


def _whole_word_pattern(phrases: tuple[str, ...]) -> Optional[re.Pattern[str]]:
    if not phrases:
        return None
    # Longest phrases first so "screen protector" wins over "protector".
    ordered = sorted(phrases, key=len, reverse=True)
    return re.compile(r"\b(?:" + "|".join(re.escape(p) for p in ordered) + r")\b")


def _accessory_patterns() -> tuple[re.Pattern[str], Optional[re.Pattern[str]]]:
    global _ACCESSORY_RE, _EXCLUSION_RE
    if _ACCESSORY_RE is None:
        terms, exclusions = _load_accessory_lexicon()
        _ACCESSORY_RE = _whole_word_pattern(terms)
        _EXCLUSION_RE = _whole_word_pattern(exclusions)
    return _ACCESSORY_RE, _EXCLUSION_RE


def classify_subcategory(text: CleanText) -> Subcategory:
    """Accessories iff a lexicon term occurs as a whole word.

    Term hits lying inside an exclusion phrase ("battery life") do not
    count; those describe the phone itself.
    """
    term_re, exclusion_re = _accessory_patterns()
    excluded: list[tuple[int, int]] = (
        [m.span() for m in exclusion_re.finditer(text)] if exclusion_re else []
    )
    for m in term_re.finditer(text):
        start, end = m.span()
        if not any(s <= start and end <= e for s, e in excluded):
            return Subcategory.CELL_PHONE_ACCESSORIES
    return Subcategory.CELL_PHONES


# ---------------------------------------------------------------------------
# Catalog table


class CatalogTable:
    """Immutable ordered collection of records; position == integer ID."""

    def __init__(self, records: Iterable[ProductRecord]):
        self._records: tuple[ProductRecord, ...] = tuple(records)
        self._by_asin: dict[str, int] = {}
        for i, rec in enumerate(self._records):
            if rec.asin in self._by_asin:
                raise DuplicateAsin(rec.asin)
            self._by_asin[rec.asin] = i

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, product_id: int) -> ProductRecord:
        return self._records[product_id]

    def __iter__(self) -> Iterator[ProductRecord]:
        return iter(self._records)

    def id_for_asin(self, asin: str) -> int:
        return self._by_asin[asin]

    def has_asin(self, asin: str) -> bool:
        return asin in self._by_asin

    @property
    def records(self) -> tuple[ProductRecord, ...]:
        return self._records


_TEXT_KEYS = ("title", "description", "features", "tech_specs")
_ALL_KEYS = frozenset(
    ("asin",) + _TEXT_KEYS + ("price", "average_rating", "review_count", "subcategory")
)


def _record_from_obj(obj: dict, line_number: int) -> ProductRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "not an object")
    unknown = set(obj) - _ALL_KEYS
    if unknown:
        raise MalformedRecord(line_number, f"unknown keys: {sorted(unknown)}")

    asin = obj.get("asin")
    if not isinstance(asin, str) or not asin:
        raise MalformedRecord(line_number, "asin must be a non-empty string")

    texts = {}
    for key in _TEXT_KEYS:
        value = obj.get(key, "")
        if value is None:
            value = ""
        if not isinstance(value, str):
            raise MalformedRecord(line_number, f"{key} must be a string")
        texts[key] = value

    price = obj.get("price")
    if price is not None:
        if not isinstance(price, (int, float)) or isinstance(price, bool) or price < 0:
            raise MalformedRecord(line_number, "price must be a non-negative number or null")
        price = float(price)

    rating = obj.get("average_rating", 0.0)
    if not isinstance(rating, (int, float)) or isinstance(rating, bool):
        raise MalformedRecord(line_number, "average_rating must be a number")
    rating = float(rating)
    if not 0.0 <= rating <= 5.0:
        raise OutOfRangeRating(line_number, rating)

    review_count = obj.get("review_count", 0)
    if not isinstance(review_count, int) or isinstance(review_count, bool) or review_count < 0:
        raise MalformedRecord(line_number, "review_count must be a non-negative integer")

    sub_label = obj.get("subcategory")
    if sub_label is None:
        merged = " ".join(clean_text(texts[k]) for k in _TEXT_KEYS)
        sub = classify_subcategory(merged)
    else:
        try:
            sub = Subcategory.from_label(sub_label)
        except (ValueError, TypeError):
            raise MalformedRecord(line_number, f"unknown subcategory: {sub_label!r}")

    return ProductRecord(
        asin=asin,
        price=price,
        average_rating=rating,
        review_count=review_count,
        subcategory=sub,
        **texts,
    )


def load_catalog(lines: Iterable[str]) -> CatalogTable:
    """Parse newline-delimited JSON records; IDs follow input order."""
    records = []
    seen: set[str] = set()
    for line_number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_number, f"invalid JSON: {exc.msg}")
        rec = _record_from_obj(obj, line_number)
        if rec.asin in seen:
            raise DuplicateAsin(rec.asin)
        seen.add(rec.asin)
        records.append(rec)
    return CatalogTable(records)


def load_catalog_file(path: str | Path) -> CatalogTable:
    with open(path, "r", encoding="utf-8") as fh:
        return load_catalog(fh)


def record_to_obj(record: ProductRecord) -> dict:
    return {
        "asin": record.asin,
        "title": record.title,
        "description": record.description,
        "features": record.features,
        "tech_specs": record.tech_specs,
        "price": record.price,
        "average_rating": record.average_rating,
        "review_count": record.review_count,
        "subcategory": record.subcategory.value,
    }


def save_catalog_file(catalog: CatalogTable, path: str | Path) -> None:
    """Write one JSON object per line, in ID order."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in catalog:
            fh.write(json.dumps(record_to_obj(rec)) + "\n")


def with_price(record: ProductRecord, price: Optional[float]) -> ProductRecord:
    return replace(record, price=price)
