"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field

Bound = Union[float, str, None]


class FiltersPayload(BaseModel):
    """Wire form of the structured filters: null, number, or level name."""

    price_min: Bound = None
    price_max: Bound = None
    review_count_min: Bound = None
    review_count_max: Bound = None
    average_rating_min: Bound = None
    average_rating_max: Bound = None
    subcategory: Optional[str] = None


class SearchRequestBody(BaseModel):
    query: str = Field(min_length=1)
    k: int = Field(default=10, ge=1)
    nprobe: Optional[int] = Field(default=None, ge=1)
    use_filters: bool = True


class HitPayload(BaseModel):
    rank: int
    id: int
    asin: str
    score: float
    title: str
    price: Optional[float]
    average_rating: float
    review_count: int
    subcategory: str


class SearchResponseBody(BaseModel):
    query: str
    filters: Optional[FiltersPayload]
    allowed_count: Optional[int]
    hits: list[HitPayload]


class ExtractRequestBody(BaseModel):
    query: str = Field(min_length=1)


class JudgmentItem(BaseModel):
    query: str = Field(min_length=1)
    relevant_asins: list[str] = Field(min_length=1)


class EvalRequestBody(BaseModel):
    judgments: list[JudgmentItem] = Field(min_length=1)
    ks: list[int] = Field(default=[1, 2, 3, 5, 10])
    nprobe: Optional[int] = Field(default=None, ge=1)
    use_filters: bool = True


class KMetrics(BaseModel):
    precision: float
    recall: float


class PerQueryMetrics(BaseModel):
    query: str
    retrieved: list[str]
    precision: dict[str, float]
    recall: dict[str, float]


class EvalResponseBody(BaseModel):
    ks: list[int]
    mean: dict[str, KMetrics]
    per_query: list[PerQueryMetrics]


class HealthResponse(BaseModel):
    status: str
    catalog_size: int
    index_size: int
    dim: int
    nlist: int
    scheme_version: int
    adapter_loaded: bool
