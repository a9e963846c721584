#!/usr/bin/env python3
"""
Timing checks for the two hot paths of the pipeline.

    python tools/benchmarks.py [--sizes 5000,10000,20000,40000] [--naive-max 10000]

1. Grid-indexed DBSCAN against the naive full-matrix version on Manhattan-like
   slots. The naive version is skipped above --naive-max points.
2. Per-symbol cost of the windowed Shannon update for short and long windows;
   the cost should not grow with the window.
"""

import argparse
import os
import sys
import time

import numpy as np
from numpy.random import PCG64, Generator
from rich.console import Console
from rich.table import Table

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from crowdsense.domain.Clustering import DbscanParams  # noqa: E402
from crowdsense.service import entropy_service, geo_service, reference_service, synth_service  # noqa: E402
from crowdsense.service.clustering_service import dbscan  # noqa: E402

console = Console()


def slot_points(n, seed=0):
    """n posts spread over the built-in hotspots, like one busy slot."""
    rng = Generator(PCG64(seed))
    hotspots = synth_service.manhattan_hotspots()
    weights = [h.weight for h in hotspots]
    pick = rng.choice(len(hotspots), size=n, p=[w / sum(weights) for w in weights])
    lats, lons = [], []
    for i, h in enumerate(hotspots):
        m = int((pick == i).sum())
        la, lo = geo_service.from_local_xy(rng.normal(0, h.spread_m, m), rng.normal(0, h.spread_m, m), h.center)
        lats.extend(la.tolist())
        lons.extend(lo.tolist())
    return lats, lons


def _time(fn, *args):
    start = time.perf_counter()
    result = fn(*args)
    return time.perf_counter() - start, result


def bench_dbscan(sizes, naive_max):
    params = DbscanParams(200.0, 10)
    table = Table(title="DBSCAN (eps 200 m, min 10)")
    table.add_column("points", justify="right", style="cyan")
    table.add_column("indexed s", justify="right")
    table.add_column("naive s", justify="right")
    table.add_column("clusters", justify="right")
    table.add_column("agree")
    for n in sizes:
        lats, lons = slot_points(n)
        pts = (np.asarray(lats), np.asarray(lons))
        t_fast, fast = _time(dbscan, pts, params)
        if n <= naive_max:
            t_naive, naive = _time(reference_service.dbscan_naive, pts, params)
            agree = "yes" if (fast.labels == naive.labels).all() else "[red]no[/]"
            naive_cell = f"{t_naive:.2f}"
        else:
            naive_cell, agree = "-", "-"
        table.add_row(str(n), f"{t_fast:.2f}", naive_cell, str(fast.n_clusters), agree)
    console.print(table)


def bench_window(windows, steps=200_000):
    rng = Generator(PCG64(1))
    symbols = rng.integers(0, 50, steps + max(windows)).tolist()
    table = Table(title="Windowed Shannon update")
    table.add_column("window", justify="right", style="cyan")
    table.add_column("us / symbol", justify="right")
    for w in windows:
        acc = entropy_service.SlidingShannon(w)
        for s in symbols[:w]:
            acc.push(s)
        start = time.perf_counter()
        for s in symbols[w:w + steps]:
            acc.push(s)
        per_symbol = (time.perf_counter() - start) / steps * 1e6
        table.add_row(str(w), f"{per_symbol:.2f}")
    console.print(table)


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def main():
    parser = argparse.ArgumentParser(description="crowdsense timing checks")
    parser.add_argument("--sizes", type=_ints, default=[5000, 10000, 20000, 40000])
    parser.add_argument("--naive-max", type=int, default=10000)
    parser.add_argument("--windows", type=_ints, default=[1000, 100000])
    args = parser.parse_args()
    bench_dbscan(args.sizes, args.naive_max)
    bench_window(args.windows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
