"""Command-line client for the pipeline stages.

Each subcommand is a thin wrapper over the library: parse flags, fill
gaps from the config file (flags win), call the owning module, write the
artifact. Data goes to stdout, diagnostics to stderr. Exit codes: 0 ok,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import sys
from typing import Optional

import click
import numpy as np

from .catalog import (
    load_catalog_file,
    merge_product_text,
    save_catalog_file,
)
from .config import RunConfig, load_run_config, run_config_from_env
from .embedder import (
    DEFAULT_DIM,
    HASH_SCHEME_VERSION,
    VectorSet,
    hash_embed,
    load_adapter,
    load_vectors,
    save_adapter,
    save_vectors,
)
from .engine import (
    load_judgments,
    run_benchmark,
    run_query_detailed,
)
from .errors import FacetSearchError
from .ivf import build_index, default_nlist, load_index, save_index, train_centroids
from .queryfilter import (
    StructuredFilters,
    ThresholdTable,
    extract_filters,
    filters_to_text,
    parse_filters_text,
)
from .trainer import TrainConfig, load_pairs, train_adapter


@click.group()
@click.option("--config", "config_path", default=None, help="Config file (key=value); defaults to $FACETSEARCH_CONFIG.")
@click.pass_context
def cli(ctx, config_path):
    """Constraint-filtered semantic product search."""
    try:
        ctx.obj = load_run_config(config_path) if config_path else run_config_from_env()
    except (OSError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc}")


def _cfg(ctx) -> RunConfig:
    return ctx.obj or RunConfig()


def _pick(flag_value, cfg_value, default=None):
    if flag_value is not None:
        return flag_value
    if cfg_value is not None:
        return cfg_value
    return default


def _require(value, option: str):
    if value is None:
        raise click.UsageError(f"missing required option {option} (not in flags or config)")
    return value


def _load_thresholds(path: Optional[str]) -> Optional[ThresholdTable]:
    return ThresholdTable.from_file(path) if path else None


def _external_extractor(command: str):
    argv = shlex.split(command)

    def extract(query: str) -> StructuredFilters:
        proc = subprocess.run(
            argv, input=query + "\n", capture_output=True, text=True
        )
        if proc.returncode != 0:
            raise FacetSearchError(
                f"external extractor exited {proc.returncode}: {proc.stderr.strip()}"
            )
        return parse_filters_text(proc.stdout.strip().splitlines()[0])

    return extract


@cli.command()
@click.option("--in", "input_path", default=None, help="Raw catalog (one JSON object per line).")
@click.option("--out", "output_path", default=None, help="Normalized catalog path.")
@click.pass_context
def ingest(ctx, input_path, output_path):
    """Validate a raw catalog and assign row-order integer IDs."""
    cfg = _cfg(ctx)
    input_path = _require(input_path, "--in")
    output_path = _require(_pick(output_path, cfg.catalog), "--out")
    catalog = load_catalog_file(input_path)
    save_catalog_file(catalog, output_path)
    click.echo(f"ingested {len(catalog)} records -> {output_path}", err=True)


@cli.command()
@click.option("--catalog", "catalog_path", default=None)
@click.option("--import", "import_path", default=None, help="Existing vector file to validate/normalize instead of hashing the catalog.")
@click.option("--out", "output_path", default=None)
@click.option("--dim", "dim", type=int, default=None)
@click.pass_context
def embed(ctx, catalog_path, import_path, output_path, dim):
    """Write embedding vectors for every catalog record (or import them)."""
    cfg = _cfg(ctx)
    output_path = _require(_pick(output_path, cfg.vectors), "--out")
    if import_path is None and cfg.import_embeddings and cfg.vectors != output_path:
        import_path = cfg.vectors
    if import_path is not None:
        vs = load_vectors(import_path, normalize=True)
        save_vectors(vs, output_path)
        click.echo(
            f"imported {len(vs)} vectors (d={vs.dim}, scheme={vs.scheme_version}) -> {output_path}",
            err=True,
        )
        return
    catalog_path = _require(_pick(catalog_path, cfg.catalog), "--catalog")
    d = _pick(dim, cfg.d, DEFAULT_DIM)
    catalog = load_catalog_file(catalog_path)
    vectors = np.stack(
        [hash_embed(merge_product_text(rec), d) for rec in catalog]
    ) if len(catalog) else np.empty((0, d))
    vs = VectorSet(
        ids=np.arange(len(catalog), dtype=np.int64),
        vectors=vectors.astype(np.float32),
        scheme_version=HASH_SCHEME_VERSION,
    )
    save_vectors(vs, output_path)
    click.echo(f"embedded {len(catalog)} records (d={d}) -> {output_path}", err=True)


@cli.command("train-adapter")
@click.option("--catalog", "catalog_path", default=None)
@click.option("--pairs", "pairs_path", default=None)
@click.option("--out", "output_path", default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--tau", type=float, default=None, help="Score temperature.")
@click.pass_context
def train_adapter_cmd(ctx, catalog_path, pairs_path, output_path, epochs, lr, seed, batch, dim, tau):
    """Fit the linear adapter on query/product pairs."""
    cfg = _cfg(ctx)
    catalog_path = _require(_pick(catalog_path, cfg.catalog), "--catalog")
    pairs_path = _require(pairs_path, "--pairs")
    output_path = _require(_pick(output_path, cfg.adapter), "--out")
    catalog = load_catalog_file(catalog_path)
    pairs = load_pairs(pairs_path, catalog)
    config = TrainConfig(
        batch_size=_pick(batch, cfg.batch, 32),
        learning_rate=_pick(lr, cfg.lr, 0.05),
        epochs=_pick(epochs, cfg.epochs, 10),
        rng_seed=_pick(seed, cfg.seed, 0),
        temperature=_pick(tau, None, 20.0),
        dim=_pick(dim, cfg.d, DEFAULT_DIM),
    )
    result = train_adapter(catalog, pairs, config)
    save_adapter(result.params, output_path)
    click.echo(
        f"trained {config.epochs} epochs on {len(pairs)} pairs: "
        f"loss {result.epoch_losses[0]:.4f} -> {result.epoch_losses[-1]:.4f}; "
        f"adapter -> {output_path}",
        err=True,
    )


@cli.command("build-index")
@click.option("--vecs", "vectors_path", default=None)
@click.option("--out", "output_path", default=None)
@click.option("--nlist", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
def build_index_cmd(ctx, vectors_path, output_path, nlist, seed):
    """Cluster the vectors and build the inverted-file index."""
    cfg = _cfg(ctx)
    vectors_path = _require(_pick(vectors_path, cfg.vectors), "--vecs")
    output_path = _require(_pick(output_path, cfg.index), "--out")
    vs = load_vectors(vectors_path, normalize=True)
    n = len(vs)
    nlist = _pick(nlist, cfg.nlist, default_nlist(n))
    seed = _pick(seed, cfg.seed, 0)
    sample_size = min(n, max(128 * nlist, 4096))
    rng = np.random.default_rng(seed)
    sample_idx = np.sort(rng.choice(n, size=sample_size, replace=False)) if sample_size < n else np.arange(n)
    centroids = train_centroids(vs.vectors[sample_idx], nlist, seed=seed)
    index = build_index(vs.vectors, vs.ids, centroids, scheme_version=vs.scheme_version)
    save_index(index, output_path)
    click.echo(
        f"indexed {index.total_count} vectors into {index.nlist} lists -> {output_path}",
        err=True,
    )


@cli.command("extract-filters")
@click.option("--query", "query_text", default=None)
def extract_filters_cmd(query_text):
    """Print the structured-filter object for a query."""
    query_text = _require(query_text, "--query")
    click.echo(filters_to_text(extract_filters(query_text)))


@cli.command()
@click.option("--idx", "index_path", default=None)
@click.option("--catalog", "catalog_path", default=None)
@click.option("--query", "query_text", default=None)
@click.option("-k", "k", type=int, default=None)
@click.option("--nprobe", type=int, default=None)
@click.option("--adapter", "adapter_path", default=None)
@click.option("--thresholds", "thresholds_path", default=None)
@click.option("--no-filters", is_flag=True, default=False)
@click.option("--extractor-cmd", "extractor_cmd", default=None, help="External filter extractor command (reads a query line, prints a filters object).")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
def search(ctx, index_path, catalog_path, query_text, k, nprobe, adapter_path,
           thresholds_path, no_filters, extractor_cmd, as_json):
    """Run one query through the full pipeline and print ranked hits."""
    cfg = _cfg(ctx)
    index_path = _require(_pick(index_path, cfg.index), "--idx")
    catalog_path = _require(_pick(catalog_path, cfg.catalog), "--catalog")
    query_text = _require(query_text, "--query")
    index = load_index(index_path)
    catalog = load_catalog_file(catalog_path)
    adapter_path = _pick(adapter_path, cfg.adapter)
    adapter = load_adapter(adapter_path) if adapter_path else None
    thresholds = _load_thresholds(_pick(thresholds_path, cfg.thresholds))
    use_filters = not (no_filters or bool(cfg.no_filters))
    extractor = _external_extractor(extractor_cmd) if extractor_cmd else None
    run = run_query_detailed(
        query_text,
        _pick(k, cfg.k, 10),
        index,
        catalog,
        adapter=adapter,
        thresholds=thresholds,
        nprobe=_pick(nprobe, cfg.nprobe),
        use_filters=use_filters,
        extractor=extractor,
    )
    if as_json:
        payload = {
            "query": query_text,
            "filters": None if run.filters is None else json.loads(filters_to_text(run.filters)),
            "hits": [
                {
                    "id": h.id,
                    "asin": catalog[h.id].asin,
                    "score": h.score,
                    "title": catalog[h.id].title,
                }
                for h in run.result.hits
            ],
        }
        click.echo(json.dumps(payload, indent=2))
    else:
        if run.filters is not None:
            click.echo(f"filters: {filters_to_text(run.filters)}", err=True)
        for rank, h in enumerate(run.result.hits, start=1):
            rec = catalog[h.id]
            click.echo(f"{rank}\t{h.id}\t{rec.asin}\t{h.score:.6f}\t{rec.title}")


@cli.command("eval")
@click.option("--idx", "index_path", default=None)
@click.option("--catalog", "catalog_path", default=None)
@click.option("--judgments", "judgments_path", default=None)
@click.option("--ks", "ks_text", default=None, help="Comma-separated k values, e.g. 1,2,3,5,10.")
@click.option("--nprobe", type=int, default=None)
@click.option("--adapter", "adapter_path", default=None)
@click.option("--thresholds", "thresholds_path", default=None)
@click.option("--no-filters", is_flag=True, default=False)
@click.option("--extractor-cmd", "extractor_cmd", default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
def eval_cmd(ctx, index_path, catalog_path, judgments_path, ks_text, nprobe,
             adapter_path, thresholds_path, no_filters, extractor_cmd, as_json):
    """Replay judged queries and report precision@k / recall@k."""
    cfg = _cfg(ctx)
    index_path = _require(_pick(index_path, cfg.index), "--idx")
    catalog_path = _require(_pick(catalog_path, cfg.catalog), "--catalog")
    judgments_path = _require(_pick(judgments_path, cfg.judgments), "--judgments")
    try:
        ks = [int(x) for x in (ks_text or "1,2,3,5,10").split(",") if x.strip()]
    except ValueError:
        raise click.UsageError(f"--ks must be comma-separated integers, got {ks_text!r}")
    index = load_index(index_path)
    catalog = load_catalog_file(catalog_path)
    adapter_path = _pick(adapter_path, cfg.adapter)
    report = run_benchmark(
        load_judgments(judgments_path),
        ks,
        index,
        catalog,
        adapter=load_adapter(adapter_path) if adapter_path else None,
        thresholds=_load_thresholds(_pick(thresholds_path, cfg.thresholds)),
        nprobe=_pick(nprobe, cfg.nprobe),
        use_filters=not (no_filters or bool(cfg.no_filters)),
        extractor=_external_extractor(extractor_cmd) if extractor_cmd else None,
    )
    click.echo(report.to_json() if as_json else report.format_table())


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except FacetSearchError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
