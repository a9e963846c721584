"""Compare ways of picking slot representatives by their mean silhouette.

opt1  K-means from k randomly chosen posts (seeded)
opt2  DBSCAN only: the k most populated clusters, everything else as one leftover group
opt3  DBSCAN-seeded K-means (the production method)
"""

import logging
import math
from datetime import date
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.random import PCG64, Generator

from ..domain.Clustering import Clustering, DbscanParams
from ..domain.GeoPoint import GeoPoint
from ..domain.Post import SlotBucket, SlotKey
from ..exceptions import DegenerateSlotException, UndefinedSilhouetteException, ValidationException
from . import clustering_service, geo_service

logger = logging.getLogger(__name__)

OPTIONS = ("opt1", "opt2", "opt3")
STUDY_COLUMNS = ["date", "weekday", "slot_index", "posts", "opt1", "opt2", "opt3"]


def random_init_clustering(lats: np.ndarray, lons: np.ndarray, k: int, seed: int) -> Clustering:
    rng = Generator(PCG64(seed))
    idx = rng.choice(lats.size, size=k, replace=False)
    return clustering_service.kmeans_arrays(lats, lons, lats[idx], lons[idx])


def dbscan_partition(lats: np.ndarray, lons: np.ndarray, k: int, params: DbscanParams) -> Clustering:
    """Top-k DBSCAN clusters keep their points; noise and smaller clusters form group k."""
    density = clustering_service.dbscan_arrays(lats, lons, params)
    if density.n_clusters < k:
        raise DegenerateSlotException(f"DBSCAN found {density.n_clusters} clusters, need {k}",
                                      "DEGENERATE_SLOT", found=density.n_clusters, wanted=k)
    top = clustering_service.top_cluster_seeds(density, k)
    relabel = np.full(density.n_clusters + 1, k, dtype=np.int64)
    relabel[np.asarray(top)] = np.arange(k)
    # NOISE (-1) indexes the last entry
    labels = relabel[density.labels]
    groups = k + int(np.any(labels == k))
    centroids = [density.centroids[c] for c in top]
    if groups > k:
        rest = labels == k
        centroids.append(GeoPoint(*geo_service.midpoint_arrays(lats[rest], lons[rest])))
    return Clustering(labels, centroids)


def _mean_silhouette(lats, lons, clustering: Clustering) -> Optional[float]:
    try:
        return clustering_service.silhouette((lats, lons), clustering)[1]
    except UndefinedSilhouetteException:
        return None


def option_silhouettes(bucket: SlotBucket, k: int, params: DbscanParams, seed: int = 0) -> Dict[str, Optional[float]]:
    """Mean silhouette of each option on one slot; None where the option is undefined."""
    if k < 2:
        raise ValidationException("The option study needs k >= 2", "INVALID_K")
    lats, lons = bucket.lats, bucket.lons
    out: Dict[str, Optional[float]] = {o: None for o in OPTIONS}
    if lats.size <= k:
        return out
    out["opt1"] = _mean_silhouette(lats, lons, random_init_clustering(lats, lons, k, seed))
    try:
        out["opt2"] = _mean_silhouette(lats, lons, dbscan_partition(lats, lons, k, params))
        out["opt3"] = _mean_silhouette(lats, lons, clustering_service.hybrid_clustering(lats, lons, k, params))
    except DegenerateSlotException:
        pass
    return out


def compare_options(buckets: Dict[Tuple[date, SlotKey], SlotBucket], k: int, params: DbscanParams,
                    seed: int = 0, max_slots: Optional[int] = None) -> pd.DataFrame:
    """One row per slot with the mean silhouette of every option."""
    rows = []
    for i, slot in enumerate(sorted(buckets)):
        if max_slots is not None and i >= max_slots:
            break
        b = buckets[slot]
        scores = option_silhouettes(b, k, params, seed + i)
        rows.append((slot[0].isoformat(), slot[1].weekday, slot[1].slot_index, len(b),
                     scores["opt1"], scores["opt2"], scores["opt3"]))
    return pd.DataFrame(rows, columns=STUDY_COLUMNS)


def summarize_options(table: pd.DataFrame) -> Dict[str, float]:
    """Share of comparable slots where DBSCAN-only is below both K-means variants, plus option means."""
    full = table.dropna(subset=list(OPTIONS))
    n = len(full)
    worse = int(((full["opt2"] < full["opt1"]) & (full["opt2"] < full["opt3"])).sum()) if n else 0
    summary = {"slots": int(len(table)), "comparable_slots": n,
               "opt2_worst_fraction": worse / n if n else 0.0}
    for o in OPTIONS:
        col = table[o].dropna()
        summary[f"{o}_mean"] = float(col.mean()) if len(col) else None
    return summary


def reproducibility(bucket: SlotBucket, k: int, params: DbscanParams, runs: int = 5,
                    seed: int = 0) -> Dict[str, int]:
    """Distinct center sets over repeated runs: the hybrid with fixed seeds vs random-init K-means with fresh seeds."""
    lats, lons = bucket.lats, bucket.lons
    hybrid = set()
    random_init = set()
    for r in range(runs):
        c = clustering_service.hybrid_clustering(lats, lons, k, params)
        hybrid.add(tuple(sorted(p.as_tuple() for p in c.centroids)))
        c = random_init_clustering(lats, lons, k, seed + r)
        random_init.add(tuple(sorted(p.as_tuple() for p in c.centroids)))
    return {"runs": runs, "opt3_distinct": len(hybrid), "opt1_distinct": len(random_init)}


def compare_k(buckets: Dict[Tuple[date, SlotKey], SlotBucket], params: DbscanParams,
              ks=(2, 3), max_slots: Optional[int] = None) -> Dict[int, Optional[float]]:
    """Mean over slots of the hybrid's mean silhouette, per k; slots degenerate for any k are left out."""
    per_k: Dict[int, List[float]] = {k: [] for k in ks}
    for i, slot in enumerate(sorted(buckets)):
        if max_slots is not None and i >= max_slots:
            break
        b = buckets[slot]
        values = {}
        try:
            for k in ks:
                values[k] = _mean_silhouette(b.lats, b.lons,
                                             clustering_service.hybrid_clustering(b.lats, b.lons, k, params))
        except DegenerateSlotException:
            continue
        if any(v is None for v in values.values()):
            continue
        for k, v in values.items():
            per_k[k].append(v)
    return {k: (math.fsum(v) / len(v) if v else None) for k, v in per_k.items()}
