"""Command-line entry points: operator ingest, service, worker, benchmarks."""

from __future__ import annotations

import asyncio
import json
import logging
import sys

import click

from .config import ServiceConfig
from .errors import IngestError, CohortqError
from .ingest import ImportDescriptor, preprocess as run_preprocess, validate as run_validate
from .registry import load_registry


@click.group()
def main():
    """Entity-partitioned columnar cohort query engine."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")


@main.group()
def ingest():
    """Preprocess raw event files into import containers."""


def _load_schema(dataset_config: str, descriptor: ImportDescriptor):
    registry = load_registry(dataset_config)
    if descriptor.table not in registry.schemas:
        raise IngestError(f"dataset config has no table {descriptor.table!r}")
    return registry.schemas[descriptor.table]


@ingest.command("preprocess")
@click.option("--descriptor", "descriptor_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--on-error", type=click.Choice(["fail", "skip"]), default="fail")
@click.option("--dataset-config", envvar="COHORTQ_DATASET_CONFIG", default="dataset.json")
@click.option("--bucket-count", envvar="COHORTQ_BUCKET_COUNT", default=100, type=int)
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
def ingest_preprocess(descriptor_path, input_path, out_dir, on_error, dataset_config,
                      bucket_count, as_json):
    """Validate, normalize and encode an input file into container files."""
    try:
        descriptor = ImportDescriptor.load(descriptor_path)
        schema = _load_schema(dataset_config, descriptor)
        report = run_preprocess(
            descriptor, schema, input_path, out_dir, on_error=on_error,
            bucket_count=bucket_count,
        )
    except (IngestError, CohortqError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2 if isinstance(exc, OSError) else 1)
    click.echo(json.dumps(report.to_document(), indent=2) if as_json else report.render())
    sys.exit(0)


@ingest.command("validate")
@click.option("--descriptor", "descriptor_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--dataset-config", envvar="COHORTQ_DATASET_CONFIG", default="dataset.json")
@click.option("--json", "as_json", is_flag=True)
def ingest_validate(descriptor_path, input_path, dataset_config, as_json):
    """Check descriptor and input without writing containers."""
    try:
        descriptor = ImportDescriptor.load(descriptor_path)
        schema = _load_schema(dataset_config, descriptor)
        report = run_validate(descriptor, schema, input_path)
    except (IngestError, CohortqError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2 if isinstance(exc, OSError) else 1)
    click.echo(json.dumps(report.to_document(), indent=2) if as_json else report.render())
    click.echo(f"{len(report.errors)} errors")
    sys.exit(0 if not report.errors else 1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.option("--workers", type=int, default=None, help="in-process workers")
@click.option("--expect-external-workers", type=int, default=0)
def serve(config_path, port, host, workers, expect_external_workers):
    """Run manager, in-process workers and the HTTP API."""
    import uvicorn

    from .api import build_service, create_app

    cfg = ServiceConfig.load(config_path)
    if port is not None:
        cfg.port = port
    if host is not None:
        cfg.host = host
    if workers is not None:
        cfg.workers = workers
    cfg.extra["expect_external_workers"] = expect_external_workers
    service = build_service(cfg)
    app = create_app(service)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


@main.command()
@click.option("--connect", required=True, help="manager address host:port")
@click.option("--id", "worker_id", default=None)
@click.option("--pool-size", envvar="COHORTQ_POOL_SIZE", default=2, type=int)
def worker(connect, worker_id, pool_size):
    """Run a standalone worker process."""
    import uuid

    from .cluster.worker import WorkerNode

    host, _, port = connect.rpartition(":")
    node = WorkerNode(worker_id or f"worker-{uuid.uuid4().hex[:8]}", pool_size=pool_size)
    asyncio.run(node.run(host, int(port)))


@main.group()
def bench():
    """Benchmarks: compression ratio, worker scaling, kernel backends."""


@bench.command("compression")
@click.option("--events", default=1_000_000, type=int)
@click.option("--entities", default=75_000, type=int)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--seed", default=1, type=int)
def bench_compression(events, entities, out_dir, seed):
    from .benchmarks import run_compression_bench

    run_compression_bench(events, entities, out_dir, seed)


@bench.command("scaling")
@click.option("--entities", default=100_000, type=int)
@click.option("--events-per-entity", default=12, type=int)
@click.option("--pools", default="1,4")
def bench_scaling(entities, events_per_entity, pools):
    from .benchmarks import run_scaling_bench

    run_scaling_bench(entities, events_per_entity, [int(p) for p in pools.split(",")])


@bench.command("kernels")
@click.option("--rows", default=2_000_000, type=int)
def bench_kernels(rows):
    from .benchmarks import run_kernel_bench

    run_kernel_bench(rows)


if __name__ == "__main__":
    main()
