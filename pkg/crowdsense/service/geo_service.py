"""Geodesic primitives: haversine distance, geographic midpoint, local east-north frame.

The Earth is modelled as a sphere of radius 6,371,000 m. The local frame is an
equirectangular projection about a center point, which stays within 0.1 % of
the great-circle distance at the 5 km scale of a city region.
"""

import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.GeoPoint import GeoPoint
from ..exceptions import DegenerateWeightsException, EmptyInputException, ValidationException

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon) - math.radians(a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine in meters; inputs in degrees, broadcast like numpy arrays."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def haversine_matrix(lats: np.ndarray, lons: np.ndarray, other_lats: Optional[np.ndarray] = None,
                     other_lons: Optional[np.ndarray] = None) -> np.ndarray:
    """Pairwise distance matrix between two point sets (or one set against itself)."""
    if other_lats is None:
        other_lats, other_lons = lats, lons
    return haversine_array(np.asarray(lats)[:, None], np.asarray(lons)[:, None],
                           np.asarray(other_lats)[None, :], np.asarray(other_lons)[None, :])


def midpoint_arrays(lats: Sequence[float], lons: Sequence[float],
                    weights: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """Weighted geographic midpoint of coordinate arrays, returned as (lat, lon) degrees.

    Sums use math.fsum so the result does not depend on the order of the points.
    """
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    if lats.size == 0:
        raise EmptyInputException("Cannot compute the midpoint of no points", "EMPTY_INPUT")
    if weights is None:
        w = np.ones_like(lats)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != lats.shape:
            raise DegenerateWeightsException(
                f"Got {w.size} weights for {lats.size} points", "WEIGHT_LENGTH_MISMATCH")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationException("Weights must be finite and non-negative", "NEGATIVE_WEIGHT")
    total = math.fsum(w)
    if total <= 0:
        raise DegenerateWeightsException("Weights sum to zero", "ZERO_WEIGHT_SUM")

    phi = np.radians(lats)
    lmb = np.radians(lons)
    cos_phi = np.cos(phi)
    x = math.fsum(w * cos_phi * np.cos(lmb)) / total
    y = math.fsum(w * cos_phi * np.sin(lmb)) / total
    z = math.fsum(w * np.sin(phi)) / total

    hyp = math.hypot(x, y)
    if math.hypot(hyp, z) < 1e-12:
        raise DegenerateWeightsException("Points cancel out; midpoint undefined", "DEGENERATE_MIDPOINT")
    return math.degrees(math.atan2(z, hyp)), math.degrees(math.atan2(y, x))


def geographic_midpoint(points: Sequence[GeoPoint], weights: Optional[Sequence[float]] = None) -> GeoPoint:
    """3D unit-vector mean of the points, renormalized back to latitude/longitude."""
    if not points:
        raise EmptyInputException("Cannot compute the midpoint of no points", "EMPTY_INPUT")
    lat, lon = midpoint_arrays([p.lat for p in points], [p.lon for p in points], weights)
    return GeoPoint(lat, lon)


def wrap_lon(lons):
    """Longitudes (or longitude differences) folded into [-180, 180)."""
    return np.mod(np.asarray(lons, dtype=float) + 180.0, 360.0) - 180.0


def to_local_xy(lats, lons, center: GeoPoint) -> Tuple[np.ndarray, np.ndarray]:
    """Project coordinates to meters east/north of `center` (equirectangular).

    Longitude differences are wrapped, so points across the antimeridian stay close.
    """
    lat0 = math.radians(center.lat)
    east = EARTH_RADIUS_M * np.radians(wrap_lon(np.asarray(lons, dtype=float) - center.lon)) * math.cos(lat0)
    north = EARTH_RADIUS_M * np.radians(np.asarray(lats, dtype=float) - center.lat)
    return east, north


def from_local_xy(east, north, center: GeoPoint) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of `to_local_xy`."""
    lat0 = math.radians(center.lat)
    lats = center.lat + np.degrees(np.asarray(north, dtype=float) / EARTH_RADIUS_M)
    lons = wrap_lon(center.lon + np.degrees(np.asarray(east, dtype=float) / (EARTH_RADIUS_M * math.cos(lat0))))
    return lats, lons


def offset_point(p: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Point displaced by the given meters in the local frame of `p`."""
    lat, lon = from_local_xy(east_m, north_m, p)
    return GeoPoint(float(lat), float(lon))


def points_to_arrays(points: Iterable[GeoPoint]) -> Tuple[np.ndarray, np.ndarray]:
    pts: List[GeoPoint] = list(points)
    return (np.fromiter((p.lat for p in pts), dtype=float, count=len(pts)),
            np.fromiter((p.lon for p in pts), dtype=float, count=len(pts)))
