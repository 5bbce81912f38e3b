"""FastAPI service wrapping the search pipeline.

Artifacts (catalog, index, optional adapter and thresholds) are loaded
once at startup from a RunConfig; every request then runs against the
immutable in-memory state, so any number of clients can query
concurrently. Build the app with create_app(), e.g.:

    FACETSEARCH_CONFIG=run.cfg uvicorn --factory facetsearch.service:create_app
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..catalog import CatalogTable, load_catalog_file
from ..config import RunConfig, run_config_from_env
from ..embedder import AdapterParams, load_adapter
from ..engine import run_benchmark, run_query_detailed
from ..errors import FacetSearchError
from ..ivf import IvfIndex, load_index
from ..queryfilter import (
    ThresholdTable,
    extract_filters,
    filters_to_obj,
)
from .schemas import (
    EvalRequestBody,
    EvalResponseBody,
    ExtractRequestBody,
    FiltersPayload,
    HealthResponse,
    HitPayload,
    SearchRequestBody,
    SearchResponseBody,
)


@dataclass
class ServiceState:
    catalog: CatalogTable
    index: IvfIndex
    adapter: Optional[AdapterParams] = None
    thresholds: Optional[ThresholdTable] = None
    default_k: int = 10
    default_nprobe: Optional[int] = None
    default_use_filters: bool = True

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "ServiceState":
        if not cfg.catalog or not cfg.index:
            raise ValueError(
                "service config must provide 'catalog' and 'index' paths "
                "(set FACETSEARCH_CONFIG or pass a RunConfig)"
            )
        return cls(
            catalog=load_catalog_file(cfg.catalog),
            index=load_index(cfg.index),
            adapter=load_adapter(cfg.adapter) if cfg.adapter else None,
            thresholds=ThresholdTable.from_file(cfg.thresholds) if cfg.thresholds else None,
            default_k=cfg.k or 10,
            default_nprobe=cfg.nprobe,
            default_use_filters=not cfg.no_filters,
        )


def create_app(config: Optional[RunConfig] = None, state: Optional[ServiceState] = None) -> FastAPI:
    """Build the service; state wins over config, config defaults to env."""
    if state is None:
        state = ServiceState.from_config(config or run_config_from_env())

    app = FastAPI(
        title="facetsearch",
        description="Constraint-filtered semantic search over a product catalog.",
        version="0.1.0",
    )
    app.state.search = state

    @app.exception_handler(FacetSearchError)
    async def _domain_error(request, exc: FacetSearchError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            catalog_size=len(state.catalog),
            index_size=state.index.total_count,
            dim=state.index.d,
            nlist=state.index.nlist,
            scheme_version=state.index.scheme_version,
            adapter_loaded=state.adapter is not None,
        )

    @app.post("/search", response_model=SearchResponseBody)
    def search(body: SearchRequestBody) -> SearchResponseBody:
        run = run_query_detailed(
            body.query,
            body.k or state.default_k,
            state.index,
            state.catalog,
            adapter=state.adapter,
            thresholds=state.thresholds,
            nprobe=body.nprobe if body.nprobe is not None else state.default_nprobe,
            use_filters=body.use_filters and state.default_use_filters,
        )
        hits = []
        for rank, h in enumerate(run.result.hits, start=1):
            rec = state.catalog[h.id]
            hits.append(
                HitPayload(
                    rank=rank,
                    id=h.id,
                    asin=rec.asin,
                    score=h.score,
                    title=rec.title,
                    price=rec.price,
                    average_rating=rec.average_rating,
                    review_count=rec.review_count,
                    subcategory=rec.subcategory.value,
                )
            )
        filters = None if run.filters is None else FiltersPayload(**filters_to_obj(run.filters))
        return SearchResponseBody(
            query=body.query,
            filters=filters,
            allowed_count=run.allowed_count,
            hits=hits,
        )

    @app.post("/extract-filters", response_model=FiltersPayload)
    def extract(body: ExtractRequestBody) -> FiltersPayload:
        return FiltersPayload(**filters_to_obj(extract_filters(body.query)))

    @app.post("/eval", response_model=EvalResponseBody)
    def evaluate(body: EvalRequestBody) -> EvalResponseBody:
        judgments = [(j.query, frozenset(j.relevant_asins)) for j in body.judgments]
        report = run_benchmark(
            judgments,
            body.ks,
            state.index,
            state.catalog,
            adapter=state.adapter,
            thresholds=state.thresholds,
            nprobe=body.nprobe if body.nprobe is not None else state.default_nprobe,
            use_filters=body.use_filters and state.default_use_filters,
        )
        return EvalResponseBody(**report.to_obj())

    return app
