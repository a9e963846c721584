"""Naive O(n^2) DBSCAN and silhouette, kept as oracles for tests and benchmarks."""

import math
from collections import deque
from typing import List, Optional, Tuple

import numpy as np

from ..domain.Clustering import NOISE, Clustering, DbscanParams
from ..domain.GeoPoint import GeoPoint
from ..exceptions import UndefinedSilhouetteException
from . import geo_service
from .clustering_service import Points, as_arrays


def dbscan_naive(points: Points, params: DbscanParams) -> Clustering:
    """Full distance matrix, breadth-first expansion over core points, same tie rules as `dbscan`."""
    lats, lons = as_arrays(points)
    n = lats.size
    d = geo_service.haversine_matrix(lats, lons)
    adj = d <= params.eps_m
    core = adj.sum(axis=1) >= params.min_points

    comp = [-1] * n
    n_comp = 0
    for start in range(n):
        if not core[start] or comp[start] != -1:
            continue
        comp[start] = n_comp
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for q in np.flatnonzero(adj[p]).tolist():
                if core[q] and comp[q] == -1:
                    comp[q] = n_comp
                    queue.append(q)
        n_comp += 1

    # relabel by smallest (lat, lon) core member
    first_key = {}
    for p in range(n):
        if core[p]:
            key = (lats[p], lons[p])
            if comp[p] not in first_key or key < first_key[comp[p]]:
                first_key[comp[p]] = key
    ranked = sorted(first_key, key=lambda c: first_key[c])
    relabel = {c: r for r, c in enumerate(ranked)}

    labels = [NOISE] * n
    for p in range(n):
        if core[p]:
            labels[p] = relabel[comp[p]]
    for p in range(n):
        if core[p]:
            continue
        best = None
        for q in range(n):
            if core[q] and adj[p, q]:
                cand = (d[p, q], labels[q])
                if best is None or cand < best:
                    best = cand
        if best is not None:
            labels[p] = best[1]

    labels_arr = np.asarray(labels, dtype=np.int64)
    centroids = [GeoPoint(*geo_service.midpoint_arrays(lats[labels_arr == c], lons[labels_arr == c]))
                 for c in range(n_comp)]
    return Clustering(labels_arr, centroids)


def silhouette_naive(points: Points, clustering: Clustering) -> Tuple[List[Optional[float]], float]:
    """Point-by-point silhouette with scalar haversine calls."""
    lats, lons = as_arrays(points)
    pts = [GeoPoint(a, b) for a, b in zip(lats.tolist(), lons.tolist())]
    labels = clustering.labels.tolist()
    members = {}
    for i, lab in enumerate(labels):
        if lab != NOISE:
            members.setdefault(lab, []).append(i)
    if len(members) < 2:
        raise UndefinedSilhouetteException("Silhouette needs at least 2 clusters", "SILHOUETTE_UNDEFINED")

    per_point: List[Optional[float]] = [None] * len(pts)
    values = []
    for i, lab in enumerate(labels):
        if lab == NOISE:
            continue
        own = [j for j in members[lab] if j != i]
        a = sum(geo_service.haversine_distance(pts[i], pts[j]) for j in own) / len(own) if own else 0.0
        b = min(sum(geo_service.haversine_distance(pts[i], pts[j]) for j in idx) / len(idx)
                for other, idx in members.items() if other != lab)
        if a == b:
            s = 0.0
        else:
            s = (b - a) / max(a, b)
        per_point[i] = s
        values.append(s)
    return per_point, math.fsum(values) / len(values)
