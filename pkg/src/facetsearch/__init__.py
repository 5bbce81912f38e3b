"""Constraint-filtered semantic search over product catalogs.

The pipeline: clean and load a catalog, hash-embed each record, cluster
the vectors into an inverted-file index, extract structured filters from
each query, preselect the catalog IDs that satisfy them, and rank the
survivors by inner product. A linear adapter trained on in-batch
negatives sharpens the embedding space.
"""

from .catalog import (
    CatalogTable,
    ProductRecord,
    Subcategory,
    classify_subcategory,
    clean_text,
    load_catalog,
    load_catalog_file,
    merge_product_text,
    save_catalog_file,
)
from .embedder import (
    DEFAULT_DIM,
    HASH_SCHEME_VERSION,
    AdapterParams,
    VectorSet,
    adapt,
    hash_embed,
    load_adapter,
    load_vectors,
    save_adapter,
    save_vectors,
    similarity,
)
from .engine import (
    MetricsReport,
    precision_at_k,
    recall_at_k,
    run_benchmark,
    run_query,
    run_query_detailed,
)
from .ivf import (
    Centroids,
    IvfIndex,
    QueryResult,
    SearchRequest,
    build_index,
    default_nlist,
    default_nprobe,
    exact_search,
    load_index,
    save_index,
    search,
    train_centroids,
)
from .queryfilter import (
    QualLevel,
    ResolvedFilters,
    StructuredFilters,
    ThresholdTable,
    default_thresholds,
    extract_filters,
    filters_to_text,
    parse_filters_text,
    preselect_ids,
    resolve_thresholds,
)
from .trainer import (
    TrainConfig,
    TrainingBatch,
    TrainingPair,
    TrainResult,
    make_batches,
    mnrl_grad,
    mnrl_loss,
    synth_queries,
    synthesize_pairs,
    train_adapter,
)

__version__ = "0.1.0"
