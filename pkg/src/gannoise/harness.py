"""Sweep execution and the results CSV."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .data import load_mnist, resolve_mnist_dir
from .errors import ConfigError
from .experiment import CSV_COLUMNS, ExperimentConfig, MetricRecord, Sweep
from .trainer import train_run

log = logging.getLogger(__name__)

RESULTS_NAME = "results.csv"
EMBEDDER_NAME = "embedder.gnem"


def run_cell(cfg: ExperimentConfig, checkpoint_dir=None) -> MetricRecord:
    """Train and evaluate one cell; returns its final row with wall time filled in."""
    start = time.perf_counter()
    result = train_run(cfg, checkpoint_dir=checkpoint_dir)
    wall_ms = int(round((time.perf_counter() - start) * 1000))
    final = result.records[-1]
    return replace(final, wall_ms=wall_ms)


def _prepare_mnist(cells: List[ExperimentConfig], out_dir: Path) -> List[ExperimentConfig]:
    # every dataset directory is checked before any training starts
    for cfg in cells:
        if cfg.dataset == "mnist":
            resolve_mnist_dir(cfg.mnist_dir)
    needs_embedder = [c for c in cells if c.dataset == "mnist" and c.embedder_path is None]
    if not needs_embedder:
        return cells
    from .embedder import save_embedder, train_embedder

    path = out_dir / EMBEDDER_NAME
    if not path.exists():
        mnist_dir = needs_embedder[0].mnist_dir
        log.info("training surrogate embedder -> %s", path)
        embedder = train_embedder(load_mnist(mnist_dir, "train"), load_mnist(mnist_dir, "test"), seed=0)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_embedder(embedder, path)
    return [
        replace(c, embedder_path=str(path)) if c.dataset == "mnist" and c.embedder_path is None else c
        for c in cells
    ]


def write_results(records, path, strip_timing=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record.to_row(strip_timing))


def read_results(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_sweep(
    sweep: Sweep,
    out_dir,
    parallelism: int = 1,
    force: bool = False,
    strip_timing: bool = False,
    checkpoints: bool = False,
) -> Path:
    """Run every cell once and write ``out_dir/results.csv``.

    Rows are sorted by config fingerprint, so the file does not depend on
    worker count or completion order.  Failed runs are kept with
    ``failed=1``.
    """
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    out_dir = Path(out_dir)
    results = out_dir / RESULTS_NAME
    if results.exists() and not force:
        raise FileExistsError(f"{results} exists; pass force=True (--force) to overwrite")
    cells = sorted(sweep.cells, key=lambda c: c.fingerprint)
    seen = set()
    for cfg in cells:
        if cfg.fingerprint in seen:
            raise ConfigError(f"duplicate sweep cell {cfg.run_id}")
        seen.add(cfg.fingerprint)
    cells = _prepare_mnist(cells, out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_dir: Optional[str] = str(out_dir / "checkpoints") if checkpoints else None

    if parallelism == 1 or len(cells) <= 1:
        records = [run_cell(cfg, checkpoint_dir) for cfg in cells]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(run_cell, cells, [checkpoint_dir] * len(cells)))
    write_results(records, results, strip_timing)
    return results
