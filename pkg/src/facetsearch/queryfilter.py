"""Structured filters: extraction from queries, threshold resolution, preselection.

A conversational query is reduced to six optional bounds (price, review
count, average rating; min/max each) plus an optional subcategory. Bounds
are numeric when the query states a number and qualitative (low, medium,
high) when it uses wording like "cheap" or "plenty of reviews". Qualitative
tokens are resolved to numeric intervals through an editable threshold
table, and the resolved bounds select the set of catalog IDs eligible for
vector search.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, fields as dataclass_fields
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .catalog import CatalogTable, CleanText, Subcategory, classify_subcategory, clean_text
from .errors import InconsistentBounds, ParseError


class QualLevel(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


# Ordering used when a max bound must borrow the next level's lower edge.
_LEVEL_ORDER = (QualLevel.LOW, QualLevel.MEDIUM, QualLevel.HIGH)

Bound = Union[float, QualLevel, None]

_BOUND_FIELDS = (
    "price_min",
    "price_max",
    "review_count_min",
    "review_count_max",
    "average_rating_min",
    "average_rating_max",
)


@dataclass(frozen=True)
class StructuredFilters:
    """The extracted constraint schema; every field may be absent."""

    price_min: Bound = None
    price_max: Bound = None
    review_count_min: Bound = None
    review_count_max: Bound = None
    average_rating_min: Bound = None
    average_rating_max: Bound = None
    subcategory: Optional[Subcategory] = None

    def is_empty(self) -> bool:
        return all(getattr(self, f) is None for f in _BOUND_FIELDS) and self.subcategory is None


def validate_filters(f: StructuredFilters) -> None:
    """Raise ValueError when the schema invariants are violated."""
    for name in _BOUND_FIELDS:
        value = getattr(f, name)
        if value is None or isinstance(value, QualLevel):
            continue
        if not isinstance(value, float) or not math.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")
        if name.startswith("average_rating") and value > 5.0:
            raise ValueError(f"{name} must lie in [0, 5], got {value}")
    for metric in ("price", "review_count", "average_rating"):
        lo = getattr(f, f"{metric}_min")
        hi = getattr(f, f"{metric}_max")
        if isinstance(lo, float) and isinstance(hi, float) and lo > hi:
            raise ValueError(f"{metric}: numeric min {lo} exceeds max {hi}")


# ---------------------------------------------------------------------------
# Threshold table


@dataclass(frozen=True)
class LevelInterval:
    """One qualitative level's interval; hi=None means unbounded above."""

    lo: float
    hi: Optional[float]
    hi_inclusive: bool = True


@dataclass(frozen=True)
class ThresholdTable:
    rating: dict[QualLevel, LevelInterval]
    review_count: dict[QualLevel, LevelInterval]
    price: dict[Subcategory, dict[QualLevel, LevelInterval]]

    @classmethod
    def from_obj(cls, payload: dict) -> "ThresholdTable":
        def levels(obj: dict) -> dict[QualLevel, LevelInterval]:
            out = {}
            for level in _LEVEL_ORDER:
                spec = obj[level.value]
                out[level] = LevelInterval(
                    lo=float(spec["lo"]),
                    hi=None if spec["hi"] is None else float(spec["hi"]),
                    hi_inclusive=bool(spec.get("hi_inclusive", True)),
                )
            return out

        return cls(
            rating=levels(payload["rating"]),
            review_count=levels(payload["review_count"]),
            price={
                Subcategory.from_label(label): levels(obj)
                for label, obj in payload["price"].items()
            },
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ThresholdTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_obj(json.load(fh))


_DEFAULT_TABLE: Optional[ThresholdTable] = None


def default_thresholds() -> ThresholdTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        payload = json.loads(
            resources.files("facetsearch.data").joinpath("thresholds.json").read_text()
        )
        _DEFAULT_TABLE = ThresholdTable.from_obj(payload)
    return _DEFAULT_TABLE


# ---------------------------------------------------------------------------
# Resolved (purely numeric) filters


@dataclass(frozen=True)
class NumericBound:
    value: float
    inclusive: bool = True


@dataclass(frozen=True)
class ResolvedFilters:
    price_min: Optional[NumericBound] = None
    price_max: Optional[NumericBound] = None
    review_count_min: Optional[NumericBound] = None
    review_count_max: Optional[NumericBound] = None
    average_rating_min: Optional[NumericBound] = None
    average_rating_max: Optional[NumericBound] = None
    subcategory: Optional[Subcategory] = None

    def is_empty(self) -> bool:
        return (
            all(getattr(self, f) is None for f in _BOUND_FIELDS) and self.subcategory is None
        )


def _resolve_min(value: Bound, intervals: dict[QualLevel, LevelInterval]) -> Optional[NumericBound]:
    if value is None:
        return None
    if isinstance(value, QualLevel):
        return NumericBound(intervals[value].lo, inclusive=True)
    return NumericBound(value, inclusive=True)


def _resolve_max(value: Bound, intervals: dict[QualLevel, LevelInterval]) -> Optional[NumericBound]:
    if value is None:
        return None
    if isinstance(value, QualLevel):
        interval = intervals[value]
        if interval.hi is not None:
            return NumericBound(interval.hi, inclusive=interval.hi_inclusive)
        idx = _LEVEL_ORDER.index(value)
        if idx + 1 < len(_LEVEL_ORDER):
            # The level is open above: cap at the next level's lower edge.
            nxt = intervals[_LEVEL_ORDER[idx + 1]]
            return NumericBound(nxt.lo, inclusive=False)
        return None
    return NumericBound(value, inclusive=True)


def resolve_thresholds(
    f: StructuredFilters, table: ThresholdTable, sub: Subcategory
) -> ResolvedFilters:
    """Replace qualitative tokens with numeric interval edges.

    Min bounds take the level's lower edge (inclusive). Max bounds take the
    level's upper edge when finite; an unbounded level is capped just below
    the next level, and an unbounded top level imposes no constraint.
    """
    price_levels = table.price[sub]
    resolved = {
        "price_min": _resolve_min(f.price_min, price_levels),
        "price_max": _resolve_max(f.price_max, price_levels),
        "review_count_min": _resolve_min(f.review_count_min, table.review_count),
        "review_count_max": _resolve_max(f.review_count_max, table.review_count),
        "average_rating_min": _resolve_min(f.average_rating_min, table.rating),
        "average_rating_max": _resolve_max(f.average_rating_max, table.rating),
    }
    for metric in ("price", "review_count", "average_rating"):
        lo = resolved[f"{metric}_min"]
        hi = resolved[f"{metric}_max"]
        if lo is not None and hi is not None and lo.value > hi.value:
            raise InconsistentBounds(metric, lo.value, hi.value)
    return ResolvedFilters(subcategory=f.subcategory or sub, **resolved)


# ---------------------------------------------------------------------------
# Preselection


def _meets_min(x: float, b: Optional[NumericBound]) -> bool:
    if b is None:
        return True
    return x > b.value or (b.inclusive and x == b.value)


def _meets_max(x: float, b: Optional[NumericBound]) -> bool:
    if b is None:
        return True
    return x < b.value or (b.inclusive and x == b.value)


def record_passes(f: ResolvedFilters, record) -> bool:
    """True when the record's metadata satisfies every present bound."""
    if f.subcategory is not None and record.subcategory is not f.subcategory:
        return False
    if f.price_min is not None or f.price_max is not None:
        # Unknown price fails closed against any price constraint.
        if record.price is None:
            return False
        if not (_meets_min(record.price, f.price_min) and _meets_max(record.price, f.price_max)):
            return False
    if not (
        _meets_min(record.review_count, f.review_count_min)
        and _meets_max(record.review_count, f.review_count_max)
    ):
        return False
    if not (
        _meets_min(record.average_rating, f.average_rating_min)
        and _meets_max(record.average_rating, f.average_rating_max)
    ):
        return False
    return True


def preselect_ids(f: ResolvedFilters, catalog: CatalogTable) -> set[int]:
    """IDs of all records whose metadata satisfies the resolved filters."""
    return {i for i, rec in enumerate(catalog) if record_passes(f, rec)}


# ---------------------------------------------------------------------------
# Rule-based extraction

_NUM = r"\d+(?:\.\d+)?"
_UNIT = r"(stars?|reviews?|dollars?)"

_P_BETWEEN = re.compile(rf"\bbetween\s+\$?({_NUM})\s+and\s+\$?({_NUM})(?:\s+{_UNIT})?\b")
_P_PLUS_STARS = re.compile(rf"\b({_NUM})\s*\+\s*stars?\b")
_P_RATED_PLUS = re.compile(rf"\brated\s+({_NUM})\s*\+")
_P_PLUS_REVIEWS = re.compile(rf"\b({_NUM})\s*\+\s*reviews?\b")
_P_MAX = re.compile(
    rf"\b(?:under|less\s+than|below|max|maximum)\s+(?:price\s*:?\s*)?\$?({_NUM})(?:\s+{_UNIT})?\b"
)
_P_MIN = re.compile(
    rf"\b(?:over|above|at\s+least|more\s+than|min|minimum)\s+(?:price\s*:?\s*)?"
    rf"\$?({_NUM})\s*\+?(?:\s+{_UNIT})?\b"
)

def _metric_for_unit(unit: Optional[str]) -> str:
    if unit is None or unit.startswith("dollar"):
        return "price"
    if unit.startswith("star"):
        return "average_rating"
    return "review_count"


def _parse_amount(text: str, metric: str) -> Optional[float]:
    value = float(text)
    if not math.isfinite(value):
        return None
    if metric == "average_rating" and value > 5.0:
        return None
    return value


class _Extraction:
    """Mutable working state: bounds set so far plus consumed text spans."""

    def __init__(self):
        self.bounds: dict[str, Bound] = {name: None for name in _BOUND_FIELDS}
        self.spans: list[tuple[int, int]] = []

    def overlaps(self, start: int, end: int) -> bool:
        return any(start < e and s < end for s, e in self.spans)

    def consume(self, start: int, end: int) -> None:
        self.spans.append((start, end))

    def set_numeric(self, field: str, value: float) -> None:
        # First extracted value wins; a value contradicting the opposite
        # numeric bound is ignored so the schema invariant always holds.
        if self.bounds[field] is not None:
            return
        metric, side = field.rsplit("_", 1)
        other = self.bounds[f"{metric}_{'max' if side == 'min' else 'min'}"]
        if isinstance(other, float):
            if side == "min" and value > other:
                return
            if side == "max" and value < other:
                return
        self.bounds[field] = value

    def set_qualitative(self, field: str, level: QualLevel) -> None:
        if self.bounds[field] is None:
            self.bounds[field] = level


def _apply_numeric_rules(text: str, state: _Extraction) -> None:
    for m in _P_BETWEEN.finditer(text):
        if state.overlaps(*m.span()):
            continue
        metric = _metric_for_unit(m.group(3))
        lo = _parse_amount(m.group(1), metric)
        hi = _parse_amount(m.group(2), metric)
        if lo is not None and hi is not None and lo > hi:
            lo, hi = hi, lo
        if lo is not None:
            state.set_numeric(f"{metric}_min", lo)
        if hi is not None:
            state.set_numeric(f"{metric}_max", hi)
        state.consume(*m.span())

    for pattern, field in (
        (_P_PLUS_STARS, "average_rating_min"),
        (_P_RATED_PLUS, "average_rating_min"),
        (_P_PLUS_REVIEWS, "review_count_min"),
    ):
        for m in pattern.finditer(text):
            if state.overlaps(*m.span()):
                continue
            value = _parse_amount(m.group(1), field.rsplit("_", 1)[0])
            if value is not None:
                state.set_numeric(field, value)
            state.consume(*m.span())

    for pattern, side in ((_P_MAX, "max"), (_P_MIN, "min")):
        for m in pattern.finditer(text):
            if state.overlaps(*m.span()):
                continue
            metric = _metric_for_unit(m.group(2))
            value = _parse_amount(m.group(1), metric)
            if value is not None:
                state.set_numeric(f"{metric}_{side}", value)
            state.consume(*m.span())


@dataclass(frozen=True)
class _QualPhrase:
    phrase: str
    pattern: re.Pattern
    assignments: tuple[tuple[str, QualLevel], ...]


_QUAL_PHRASES: Optional[tuple[_QualPhrase, ...]] = None


def qualitative_phrases() -> tuple[_QualPhrase, ...]:
    """The bundled qualitative cue lexicon, longest phrase first."""
    global _QUAL_PHRASES
    if _QUAL_PHRASES is None:
        payload = json.loads(
            resources.files("facetsearch.data").joinpath("qualitative_lexicon.json").read_text()
        )
        entries = []
        for item in sorted(payload["phrases"], key=lambda e: len(e["phrase"]), reverse=True):
            phrase = item["phrase"]
            assignments = tuple(
                (field, QualLevel(level)) for field, level in item["set"].items()
            )
            entries.append(
                _QualPhrase(
                    phrase=phrase,
                    pattern=re.compile(rf"\b{re.escape(phrase)}\b"),
                    assignments=assignments,
                )
            )
        _QUAL_PHRASES = tuple(entries)
    return _QUAL_PHRASES


def _apply_qualitative_rules(text: str, state: _Extraction) -> None:
    matches: list[tuple[int, int, _QualPhrase]] = []
    for entry in qualitative_phrases():
        for m in entry.pattern.finditer(text):
            matches.append((m.start(), -(m.end() - m.start()), entry))
    matches.sort(key=lambda t: (t[0], t[1]))
    for start, neg_len, entry in matches:
        end = start - neg_len
        if state.overlaps(start, end):
            continue
        for field, level in entry.assignments:
            state.set_qualitative(field, level)
        state.consume(start, end)


def extract_filters(query: CleanText) -> StructuredFilters:
    """Extract the structured-filter schema from a query by rule pipeline.

    Numeric comparator spans are read first ("under $300", "4+ stars",
    "between $10 and $14"); qualitative cue phrases fill fields the numeric
    pass left absent; the subcategory comes from the accessory lexicon.
    Total: anything unparseable is ignored.
    """
    text = clean_text(query)
    state = _Extraction()
    _apply_numeric_rules(text, state)
    _apply_qualitative_rules(text, state)
    return StructuredFilters(subcategory=classify_subcategory(text), **state.bounds)


# ---------------------------------------------------------------------------
# JSON wire format (null for absent, level names for qualitative tokens)


def _bound_to_json(value: Bound):
    if isinstance(value, QualLevel):
        return value.value
    return value


def filters_to_text(f: StructuredFilters) -> str:
    obj = {name: _bound_to_json(getattr(f, name)) for name in _BOUND_FIELDS}
    obj["subcategory"] = None if f.subcategory is None else f.subcategory.value
    return json.dumps(obj)


def filters_to_obj(f: StructuredFilters) -> dict:
    return json.loads(filters_to_text(f))


_QUAL_NAMES = {level.value: level for level in QualLevel}


def _bound_from_json(name: str, value) -> Bound:
    if value is None:
        return None
    if isinstance(value, str):
        level = _QUAL_NAMES.get(value)
        if level is None:
            raise ParseError(0, f"{name}: unknown qualitative level {value!r}")
        return level
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(0, f"{name}: expected number, level name, or null")
    return float(value)


def parse_filters_text(text: str) -> StructuredFilters:
    """Parse the JSON filter object; inverse of filters_to_text."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.pos, exc.msg)
    if not isinstance(obj, dict):
        raise ParseError(0, "filters must be a JSON object")
    known = set(_BOUND_FIELDS) | {"subcategory"}
    unknown = set(obj) - known
    if unknown:
        raise ParseError(0, f"unknown keys: {sorted(unknown)}")
    kwargs = {name: _bound_from_json(name, obj.get(name)) for name in _BOUND_FIELDS}
    sub_label = obj.get("subcategory")
    if sub_label is not None:
        try:
            kwargs["subcategory"] = Subcategory.from_label(sub_label)
        except (ValueError, TypeError):
            raise ParseError(0, f"unknown subcategory: {sub_label!r}")
    f = StructuredFilters(**kwargs)
    try:
        validate_filters(f)
    except ValueError as exc:
        raise ParseError(0, str(exc))
    return f
