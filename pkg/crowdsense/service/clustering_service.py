"""DBSCAN, seeded K-means, hybrid representative selection and silhouette under the haversine metric."""

import logging
import math
from datetime import date
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..domain.Clustering import NOISE, Clustering, DbscanParams, RepresentativeSet
from ..domain.GeoPoint import GeoPoint
from ..domain.Post import SlotBucket, SlotKey
from ..exceptions import (
    DegenerateSlotException,
    DegenerateWeightsException,
    EmptyInputException,
    EmptySlotException,
    FormatError,
    IoError,
    UndefinedSilhouetteException,
    ValidationException,
)
from . import geo_service

logger = logging.getLogger(__name__)

KMEANS_MAX_ITER = 100
KMEANS_TOL_M = 1.0
SILHOUETTE_BLOCK = 2048
MAX_GRID_LON_SPAN = 90.0
REPS_COLUMNS = ["date", "weekday", "slot_index", "status", "rep_index", "lat", "lon", "support"]
COORD_FORMAT = "%.7f"

Points = Union[Sequence[GeoPoint], Tuple[np.ndarray, np.ndarray]]


def as_arrays(points: Points) -> Tuple[np.ndarray, np.ndarray]:
    """Accept a GeoPoint list or a (lats, lons) pair of arrays."""
    if isinstance(points, tuple) and len(points) == 2 and not isinstance(points[0], GeoPoint):
        lats = np.asarray(points[0], dtype=float)
        lons = np.asarray(points[1], dtype=float)
    else:
        lats, lons = geo_service.points_to_arrays(points)
    if lats.size == 0:
        raise EmptyInputException("No points to cluster", "EMPTY_INPUT")
    return lats, lons


def _centroids(lats: np.ndarray, lons: np.ndarray, labels: np.ndarray, n_clusters: int) -> List[GeoPoint]:
    out = []
    for c in range(n_clusters):
        members = labels == c
        out.append(GeoPoint(*geo_service.midpoint_arrays(lats[members], lons[members])))
    return out


# ---------- DBSCAN ----------

def _grid_cell_size(lats: np.ndarray, eps_m: float, center: GeoPoint) -> Optional[float]:
    """Projected cell size that can only over-cover an eps neighbourhood; None near the poles."""
    min_cos = math.cos(math.radians(float(np.max(np.abs(lats)))))
    if min_cos < 1e-6:
        return None
    stretch = max(1.0, math.cos(math.radians(center.lat)) / min_cos)
    return eps_m * stretch * (1.0 + 1e-6)


def _frame_center(lats: np.ndarray, lons: np.ndarray) -> Optional[GeoPoint]:
    """Geographic midpoint to project about; None when the points span too much longitude for a flat grid."""
    try:
        lat, lon = geo_service.midpoint_arrays(lats, lons)
    except DegenerateWeightsException:
        return None
    if np.max(np.abs(geo_service.wrap_lon(lons - lon))) > MAX_GRID_LON_SPAN:
        return None
    return GeoPoint(lat, lon)


def neighbor_pairs(lats: np.ndarray, lons: np.ndarray, eps_m: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ordered pairs (i, j, d) with haversine d <= eps_m, self-pairs included.

    Candidates come from a uniform grid over the local east-north frame; each
    occupied cell is checked against its 3x3 block in one vectorized call.
    """
    n = lats.size
    center = _frame_center(lats, lons)
    cell = None if center is None else _grid_cell_size(lats, eps_m, center)
    if cell is None:
        d = geo_service.haversine_matrix(lats, lons)
        i, j = np.nonzero(d <= eps_m)
        return i, j, d[i, j]

    x, y = geo_service.to_local_xy(lats, lons, center)
    cx = np.floor(x / cell).astype(np.int64)
    cy = np.floor(y / cell).astype(np.int64)
    order = np.lexsort((cy, cx))
    keys = np.stack((cx[order], cy[order]), axis=1)
    change = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change, [n]))
    cells: Dict[Tuple[int, int], np.ndarray] = {
        (int(keys[a, 0]), int(keys[a, 1])): order[a:b] for a, b in zip(starts.tolist(), stops.tolist())
    }

    out_i, out_j, out_d = [], [], []
    for (gx, gy), members in cells.items():
        block = [cells[(gx + dx, gy + dy)] for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (gx + dx, gy + dy) in cells]
        candidates = np.concatenate(block)
        d = geo_service.haversine_matrix(lats[members], lons[members], lats[candidates], lons[candidates])
        r, c = np.nonzero(d <= eps_m)
        out_i.append(members[r])
        out_j.append(candidates[c])
        out_d.append(d[r, c])
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_d)


def canonical_component_order(lats: np.ndarray, lons: np.ndarray, point_idx: np.ndarray,
                              component: np.ndarray) -> np.ndarray:
    """Rank components by the lexicographically smallest (lat, lon) among their points."""
    order = np.lexsort((lons[point_idx], lats[point_idx]))
    seen: Dict[int, int] = {}
    for comp in component[order].tolist():
        if comp not in seen:
            seen[comp] = len(seen)
    rank = np.empty(len(seen), dtype=np.int64)
    for comp, r in seen.items():
        rank[comp] = r
    return rank


def dbscan_arrays(lats: np.ndarray, lons: np.ndarray, params: DbscanParams) -> Clustering:
    n = lats.size
    if n == 0:
        raise EmptyInputException("No points to cluster", "EMPTY_INPUT")
    pi, pj, pd_ = neighbor_pairs(lats, lons, params.eps_m)
    counts = np.bincount(pi, minlength=n)
    core = counts >= params.min_points
    labels = np.full(n, NOISE, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return Clustering(labels, [])

    # connected components of the core-core neighbourhood graph
    local = np.full(n, -1, dtype=np.int64)
    local[core_idx] = np.arange(core_idx.size)
    edge = core[pi] & core[pj]
    graph = csr_matrix((np.ones(int(edge.sum()), dtype=np.int8), (local[pi[edge]], local[pj[edge]])),
                       shape=(core_idx.size, core_idx.size))
    n_comp, comp = connected_components(graph, directed=False)
    rank = canonical_component_order(lats, lons, core_idx, comp)
    labels[core_idx] = rank[comp]

    # border points join the cluster of their nearest core neighbour; ties go to the lowest id
    border = ~core[pi] & core[pj]
    if border.any():
        bi, bd, bc = pi[border], pd_[border], labels[pj[border]]
        order = np.lexsort((bc, bd, bi))
        bi, bc = bi[order], bc[order]
        first = np.concatenate(([True], bi[1:] != bi[:-1]))
        labels[bi[first]] = bc[first]

    return Clustering(labels, _centroids(lats, lons, labels, n_comp))


def dbscan(points: Points, params: DbscanParams) -> Clustering:
    """Density clustering with haversine eps; border ties resolved by nearest core point."""
    lats, lons = as_arrays(points)
    return dbscan_arrays(lats, lons, params)


# ---------- K-means ----------

def _objective(dist: np.ndarray, labels: np.ndarray) -> float:
    picked = dist[np.arange(labels.size), labels]
    return math.fsum((picked * picked).tolist())


def _reseed_empty(dist: np.ndarray, labels: np.ndarray, c_lats: np.ndarray, c_lons: np.ndarray,
                  lats: np.ndarray, lons: np.ndarray) -> None:
    """Move every memberless center onto the point farthest from its nearest center."""
    k = c_lats.size
    for c in range(k):
        if np.any(labels == c):
            continue
        nearest = dist[np.arange(labels.size), labels].copy()
        sizes = np.bincount(labels, minlength=k)
        # a point that is alone in its cluster cannot move without emptying it
        nearest[sizes[labels] <= 1] = -1.0
        if nearest.max() < 0:
            continue
        far = int(np.argmax(nearest))
        logger.debug(f"K-means center {c} lost its members; reseeding at point {far}")
        c_lats[c], c_lons[c] = lats[far], lons[far]
        dist[:, c] = geo_service.haversine_array(lats, lons, c_lats[c], c_lons[c])
        labels[far] = c


def kmeans_arrays(lats: np.ndarray, lons: np.ndarray, c_lats: np.ndarray, c_lons: np.ndarray,
                  max_iter: int = KMEANS_MAX_ITER, tol_m: float = KMEANS_TOL_M) -> Clustering:
    c_lats = np.array(c_lats, dtype=float)
    c_lons = np.array(c_lons, dtype=float)
    k = c_lats.size
    if k < 1:
        raise ValidationException("K-means needs at least one initial center", "NO_INITIAL_CENTERS")
    if lats.size == 0:
        raise EmptyInputException("No points to cluster", "EMPTY_INPUT")
    if max_iter < 1 or tol_m < 0:
        raise ValidationException("max_iter must be >= 1 and tol_m >= 0", "INVALID_KMEANS_PARAMS")

    history: List[float] = []
    labels = np.zeros(lats.size, dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = geo_service.haversine_matrix(lats, lons, c_lats, c_lons)
        labels = np.argmin(dist, axis=1)
        _reseed_empty(dist, labels, c_lats, c_lons, lats, lons)
        history.append(_objective(dist, labels))

        new_lats = np.empty(k)
        new_lons = np.empty(k)
        for c in range(k):
            members = labels == c
            if not members.any():
                new_lats[c], new_lons[c] = c_lats[c], c_lons[c]
                continue
            new_lats[c], new_lons[c] = geo_service.midpoint_arrays(lats[members], lons[members])
        shift = geo_service.haversine_array(c_lats, c_lons, new_lats, new_lons)
        c_lats, c_lons = new_lats, new_lons
        dist = geo_service.haversine_matrix(lats, lons, c_lats, c_lons)
        history.append(_objective(dist, labels))
        if np.all(shift < tol_m):
            break

    centroids = [GeoPoint(a, b) for a, b in zip(c_lats.tolist(), c_lons.tolist())]
    return Clustering(labels, centroids, n_iter=n_iter, objective_history=history)


def kmeans(points: Points, initial_centers: Sequence[GeoPoint], max_iter: int = KMEANS_MAX_ITER,
           tol_m: float = KMEANS_TOL_M) -> Clustering:
    """Lloyd iterations with haversine assignment and geographic-midpoint updates.

    objective_history alternates the objective after each assignment and after
    each center update, so it is non-increasing.
    """
    lats, lons = as_arrays(points)
    if not initial_centers:
        raise ValidationException("K-means needs at least one initial center", "NO_INITIAL_CENTERS")
    c_lats, c_lons = geo_service.points_to_arrays(initial_centers)
    return kmeans_arrays(lats, lons, c_lats, c_lons, max_iter, tol_m)


# ---------- Representatives ----------

def _canonical_reps(centroids: Sequence[GeoPoint], support: Sequence[int]) -> Tuple[List[GeoPoint], List[int]]:
    order = sorted(range(len(centroids)), key=lambda c: (-support[c], centroids[c].lat, centroids[c].lon))
    return [centroids[c] for c in order], [int(support[c]) for c in order]


def top_cluster_seeds(clustering: Clustering, k: int) -> List[int]:
    """Ids of the k most populated clusters (ties by lower id)."""
    sizes = clustering.sizes
    return sorted(range(len(sizes)), key=lambda c: (-sizes[c], c))[:k]


def hybrid_clustering(lats: np.ndarray, lons: np.ndarray, k: int, dbscan_params: DbscanParams,
                      max_iter: int = KMEANS_MAX_ITER, tol_m: float = KMEANS_TOL_M) -> Clustering:
    """K-means over all points, seeded with the centroids of the k largest DBSCAN clusters."""
    density = dbscan_arrays(lats, lons, dbscan_params)
    if density.n_clusters < k:
        raise DegenerateSlotException(
            f"DBSCAN found {density.n_clusters} clusters, need {k}",
            "DEGENERATE_SLOT", found=density.n_clusters, wanted=k)
    seeds = [density.centroids[c] for c in top_cluster_seeds(density, k)]
    c_lats, c_lons = geo_service.points_to_arrays(seeds)
    return kmeans_arrays(lats, lons, c_lats, c_lons, max_iter, tol_m)


def select_representatives(bucket: SlotBucket, k: int, dbscan_params: DbscanParams,
                           max_iter: int = KMEANS_MAX_ITER, tol_m: float = KMEANS_TOL_M) -> RepresentativeSet:
    """k=1: geographic midpoint. k=2,3: DBSCAN seeds the k largest clusters, K-means refines over all posts."""
    if k not in (1, 2, 3):
        raise ValidationException(f"k must be 1, 2 or 3, got {k}", "INVALID_K")
    if len(bucket) == 0:
        raise EmptySlotException(f"Slot {bucket.date} #{bucket.key.slot_index} has no posts", "EMPTY_SLOT")
    lats, lons = bucket.lats, bucket.lons
    if k == 1:
        return RepresentativeSet(bucket.date, bucket.key, [GeoPoint(*geo_service.midpoint_arrays(lats, lons))],
                                 [len(bucket)])
    try:
        refined = hybrid_clustering(lats, lons, k, dbscan_params, max_iter, tol_m)
    except DegenerateSlotException as e:
        raise DegenerateSlotException(f"{e.message} in slot {bucket.date} #{bucket.key.slot_index}",
                                      e.error_code, found=e.found, wanted=e.wanted)
    reps, support = _canonical_reps(refined.centroids, refined.sizes)
    return RepresentativeSet(bucket.date, bucket.key, reps, support)


def _represent_one(args):
    bucket, k, params = args
    try:
        return (bucket.date, bucket.key), select_representatives(bucket, k, params), None
    except (DegenerateSlotException, EmptySlotException) as e:
        return (bucket.date, bucket.key), None, e.error_code


def represent_all(buckets: Dict[Tuple[date, SlotKey], SlotBucket], k: int, params: DbscanParams,
                  workers: int = 1, skipped: Optional[Dict[Tuple[date, SlotKey], str]] = None
                  ) -> Tuple[Dict[Tuple[date, SlotKey], RepresentativeSet], Dict[str, int]]:
    """Representatives of every bucket; degenerate and empty slots are left out and counted.

    When `skipped` is given it receives the status ("degenerate" or "empty") of every left-out slot.
    """
    jobs = [(buckets[key], k, params) for key in sorted(buckets)]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_represent_one, jobs, chunksize=max(1, len(jobs) // (workers * 8)))
    else:
        results = [_represent_one(job) for job in jobs]

    reps: Dict[Tuple[date, SlotKey], RepresentativeSet] = {}
    counts = {"slots": len(jobs), "represented": 0, "degenerate": 0, "empty": 0}
    for slot, rep, err in results:
        if rep is not None:
            reps[slot] = rep
            counts["represented"] += 1
            continue
        status = "empty" if err == "EMPTY_SLOT" else "degenerate"
        counts[status] += 1
        if skipped is not None:
            skipped[slot] = status
        if status == "degenerate":
            logger.debug(f"Degenerate slot {slot[0]} #{slot[1].slot_index}")
    logger.info(f"Represented {counts['represented']} of {counts['slots']} slots "
                f"({counts['degenerate']} degenerate, {counts['empty']} empty)")
    return reps, counts


def write_reps(reps: Dict[Tuple[date, SlotKey], RepresentativeSet], path: str,
               skipped: Optional[Dict[Tuple[date, SlotKey], str]] = None) -> None:
    """reps.csv: one row per representative; skipped slots get one row with blank coordinates."""
    rows = []
    for (day, key), rs in reps.items():
        for r, (p, s) in enumerate(zip(rs.reps, rs.support)):
            rows.append((day.isoformat(), key.weekday, key.slot_index, "ok", r, p.lat, p.lon, s))
    for (day, key), status in (skipped or {}).items():
        rows.append((day.isoformat(), key.weekday, key.slot_index, status, None, None, None, None))
    frame = pd.DataFrame(rows, columns=REPS_COLUMNS)
    frame = frame.sort_values(["date", "slot_index", "rep_index"], kind="mergesort", na_position="first")
    frame["rep_index"] = frame["rep_index"].astype("Int64")
    frame["support"] = frame["support"].astype("Int64")
    try:
        frame.to_csv(path, index=False, float_format=COORD_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write representatives to '{path}': {str(e)}", "WRITE_FAILED")


def read_reps(path: str, slot_minutes: int) -> Tuple[Dict[Tuple[date, SlotKey], RepresentativeSet],
                                                    Dict[Tuple[date, SlotKey], str]]:
    """Inverse of `write_reps`: (representatives, skipped slot statuses)."""
    try:
        frame = pd.read_csv(path, dtype={"date": str, "status": str})
    except FileNotFoundError:
        raise IoError(f"Representative file '{path}' not found", "FILE_NOT_FOUND")
    except ValueError as e:
        raise FormatError(f"Representative file '{path}' is malformed: {str(e)}", "BAD_REPS_FILE")
    missing = set(REPS_COLUMNS) - set(frame.columns)
    if missing:
        raise FormatError(f"Representative file '{path}' lacks columns {sorted(missing)}", "BAD_REPS_FILE")

    reps: Dict[Tuple[date, SlotKey], RepresentativeSet] = {}
    skipped: Dict[Tuple[date, SlotKey], str] = {}
    for (day_s, slot_index), grp in frame.groupby(["date", "slot_index"], sort=True):
        day = date.fromisoformat(day_s)
        key = SlotKey(day.weekday(), int(slot_index), slot_minutes)
        ok = grp[grp["status"] == "ok"].sort_values("rep_index")
        if ok.empty:
            skipped[(day, key)] = str(grp["status"].iloc[0])
            continue
        points = [GeoPoint(float(a), float(b)) for a, b in zip(ok["lat"], ok["lon"])]
        reps[(day, key)] = RepresentativeSet(day, key, points, ok["support"].astype(int).tolist())
    return reps, skipped


# ---------- Silhouette ----------

def silhouette(points: Points, clustering: Clustering) -> Tuple[List[Optional[float]], float]:
    """Per-point s(i) (None for noise) and the mean over non-noise points.

    s(i) = (b - a) / max(a, b), and 0 when a(i) == b(i). A singleton has a(i) = 0.
    """
    lats, lons = as_arrays(points)
    labels = clustering.labels
    if labels.size != lats.size:
        raise ValidationException("Clustering does not match the point set", "LABEL_LENGTH_MISMATCH")
    keep = np.flatnonzero(labels != NOISE)
    present = np.unique(labels[keep])
    if present.size < 2:
        raise UndefinedSilhouetteException(
            f"Silhouette needs at least 2 clusters, got {present.size}", "SILHOUETTE_UNDEFINED")

    sub_lab = np.searchsorted(present, labels[keep])
    k = present.size
    onehot = np.zeros((keep.size, k))
    onehot[np.arange(keep.size), sub_lab] = 1.0
    sizes = onehot.sum(axis=0)
    s_lat, s_lon = lats[keep], lons[keep]

    values = np.empty(keep.size)
    for a in range(0, keep.size, SILHOUETTE_BLOCK):
        b = min(keep.size, a + SILHOUETTE_BLOCK)
        sums = geo_service.haversine_matrix(s_lat[a:b], s_lon[a:b], s_lat, s_lon) @ onehot
        own = sub_lab[a:b]
        rows = np.arange(b - a)
        own_size = sizes[own]
        a_i = np.where(own_size > 1, sums[rows, own] / np.maximum(own_size - 1, 1), 0.0)
        mean_other = sums / sizes[None, :]
        mean_other[rows, own] = np.inf
        b_i = mean_other.min(axis=1)
        denom = np.maximum(a_i, b_i)
        s = np.where(a_i == b_i, 0.0, (b_i - a_i) / np.where(denom > 0, denom, 1.0))
        values[a:b] = np.clip(s, -1.0, 1.0)

    per_point: List[Optional[float]] = [None] * lats.size
    for idx, v in zip(keep.tolist(), values.tolist()):
        per_point[idx] = v
    return per_point, math.fsum(values.tolist()) / keep.size
