"""Query pipeline and retrieval evaluation.

run_query chains the stages: clean the query, extract and resolve filters,
preselect the eligible catalog IDs, embed, and run the ID-restricted index
search. Filters are hard constraints: an empty preselection returns an
empty result rather than falling back to unfiltered search. run_benchmark
replays judged queries and reports macro-averaged precision@k / recall@k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Callable, Optional, Sequence

from .catalog import CatalogTable, classify_subcategory, clean_text
from .embedder import HASH_SCHEME_VERSION, AdapterParams, adapt, hash_embed
from .errors import EmptyRelevantSet, MissingAsin, VersionMismatch
from .ivf import IvfIndex, QueryResult, SearchRequest, default_nprobe, search
from .queryfilter import (
    ResolvedFilters,
    StructuredFilters,
    ThresholdTable,
    default_thresholds,
    extract_filters,
    preselect_ids,
    resolve_thresholds,
)

Extractor = Callable[[str], StructuredFilters]


@dataclass(frozen=True)
class PipelineRun:
    """One query's journey through the pipeline, for display and debugging."""

    result: QueryResult
    filters: Optional[StructuredFilters]
    resolved: Optional[ResolvedFilters]
    allowed_count: Optional[int]


def run_query_detailed(
    text: str,
    k: int,
    index: IvfIndex,
    catalog: CatalogTable,
    adapter: Optional[AdapterParams] = None,
    thresholds: Optional[ThresholdTable] = None,
    nprobe: Optional[int] = None,
    use_filters: bool = True,
    extractor: Optional[Extractor] = None,
) -> PipelineRun:
    if index.scheme_version != HASH_SCHEME_VERSION:
        raise VersionMismatch(HASH_SCHEME_VERSION, index.scheme_version, "embedding scheme")
    cleaned = clean_text(text)
    allowed: Optional[AbstractSet[int]] = None
    filters: Optional[StructuredFilters] = None
    resolved: Optional[ResolvedFilters] = None
    if use_filters:
        filters = (extractor or extract_filters)(cleaned)
        sub = filters.subcategory or classify_subcategory(cleaned)
        resolved = resolve_thresholds(filters, thresholds or default_thresholds(), sub)
        allowed = preselect_ids(resolved, catalog)
        if not allowed:
            return PipelineRun(QueryResult(hits=()), filters, resolved, 0)

    q = hash_embed(cleaned, index.d)
    if adapter is not None:
        q = adapt(q, adapter)
    req = SearchRequest(
        query_vector=q,
        k=k,
        nprobe=nprobe if nprobe is not None else default_nprobe(index.nlist),
        allowed_ids=allowed,
    )
    result = search(index, req)
    return PipelineRun(result, filters, resolved, None if allowed is None else len(allowed))


def run_query(
    text: str,
    k: int,
    index: IvfIndex,
    catalog: CatalogTable,
    adapter: Optional[AdapterParams] = None,
    thresholds: Optional[ThresholdTable] = None,
    nprobe: Optional[int] = None,
    use_filters: bool = True,
    extractor: Optional[Extractor] = None,
) -> QueryResult:
    """Full pipeline: extract, resolve, preselect, embed, filtered search."""
    return run_query_detailed(
        text, k, index, catalog, adapter, thresholds, nprobe, use_filters, extractor
    ).result


# ---------------------------------------------------------------------------
# Metrics. `retrieved` is the ranked asin list of a result; the denominator
# of precision stays k even when fewer hits came back.


def precision_at_k(retrieved: Sequence[str], relevant: AbstractSet[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    top = retrieved[: min(k, len(retrieved))]
    return len(set(top) & set(relevant)) / k


def recall_at_k(retrieved: Sequence[str], relevant: AbstractSet[str], k: int) -> float:
    if not relevant:
        raise EmptyRelevantSet("relevant set must be non-empty")
    top = retrieved[: min(k, len(retrieved))]
    return len(set(top) & set(relevant)) / len(relevant)


def result_asins(result: QueryResult, catalog: CatalogTable) -> list[str]:
    return [catalog[h.id].asin for h in result.hits]


# ---------------------------------------------------------------------------
# Benchmark

Judgments = Sequence[tuple[str, AbstractSet[str]]]


@dataclass(frozen=True)
class QueryMetrics:
    query: str
    retrieved: tuple[str, ...]
    precision: dict[int, float]
    recall: dict[int, float]


@dataclass(frozen=True)
class MetricsReport:
    ks: tuple[int, ...]
    mean_precision: dict[int, float]
    mean_recall: dict[int, float]
    per_query: tuple[QueryMetrics, ...]

    def to_obj(self) -> dict:
        return {
            "ks": list(self.ks),
            "mean": {
                str(k): {
                    "precision": self.mean_precision[k],
                    "recall": self.mean_recall[k],
                }
                for k in self.ks
            },
            "per_query": [
                {
                    "query": qm.query,
                    "retrieved": list(qm.retrieved),
                    "precision": {str(k): qm.precision[k] for k in self.ks},
                    "recall": {str(k): qm.recall[k] for k in self.ks},
                }
                for qm in self.per_query
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), indent=2)

    def format_table(self) -> str:
        lines = [f"{'k':>4}  {'precision@k':>12}  {'recall@k':>12}"]
        for k in self.ks:
            lines.append(
                f"{k:>4}  {self.mean_precision[k]:>12.4f}  {self.mean_recall[k]:>12.4f}"
            )
        lines.append(f"queries: {len(self.per_query)}")
        return "\n".join(lines)


def validate_judgments(judgments: Judgments, catalog: CatalogTable) -> None:
    for query, relevant in judgments:
        if not relevant:
            raise EmptyRelevantSet(f"query {query!r} has no relevant asins")
        for asin in relevant:
            if not catalog.has_asin(asin):
                raise MissingAsin(asin)


def run_benchmark(
    judgments: Judgments,
    ks: Sequence[int],
    index: IvfIndex,
    catalog: CatalogTable,
    adapter: Optional[AdapterParams] = None,
    thresholds: Optional[ThresholdTable] = None,
    nprobe: Optional[int] = None,
    use_filters: bool = True,
    extractor: Optional[Extractor] = None,
) -> MetricsReport:
    """Run every judged query and macro-average the metrics per k."""
    validate_judgments(judgments, catalog)
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1:
        raise ValueError("ks must be positive integers")
    per_query = []
    for query, relevant in judgments:
        result = run_query(
            query,
            max(ks),
            index,
            catalog,
            adapter=adapter,
            thresholds=thresholds,
            nprobe=nprobe,
            use_filters=use_filters,
            extractor=extractor,
        )
        retrieved = result_asins(result, catalog)
        per_query.append(
            QueryMetrics(
                query=query,
                retrieved=tuple(retrieved),
                precision={k: precision_at_k(retrieved, relevant, k) for k in ks},
                recall={k: recall_at_k(retrieved, relevant, k) for k in ks},
            )
        )
    n = len(per_query)
    mean_precision = {k: sum(qm.precision[k] for qm in per_query) / n for k in ks}
    mean_recall = {k: sum(qm.recall[k] for qm in per_query) / n for k in ks}
    return MetricsReport(
        ks=ks,
        mean_precision=mean_precision,
        mean_recall=mean_recall,
        per_query=tuple(per_query),
    )


# ---------------------------------------------------------------------------
# Judgments file: "query<TAB>asin<TAB>asin..." per line.


def load_judgments(path: str | Path) -> list[tuple[str, frozenset[str]]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"expected 'query<TAB>asin...', got {line!r}")
            out.append((parts[0], frozenset(p for p in parts[1:] if p)))
    return out


def save_judgments(judgments: Judgments, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query, relevant in judgments:
            fh.write(query + "\t" + "\t".join(sorted(relevant)) + "\n")
