import math
from datetime import date
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .GeoPoint import GeoPoint
from .Post import SlotKey
from ..exceptions import ValidationException

NOISE = -1


class DbscanParams:
    def __init__(self, eps_m: float = 200.0, min_points: int = 10):
        """DBSCAN neighbourhood radius (meters) and density threshold."""
        try:
            eps_m = float(eps_m)
        except (TypeError, ValueError):
            raise ValidationException(f"eps_m must be a number, got {eps_m!r}", "INVALID_EPS")
        if not (math.isfinite(eps_m) and eps_m > 0):
            raise ValidationException(f"eps_m must be > 0, got {eps_m}", "INVALID_EPS")
        if isinstance(min_points, bool) or not isinstance(min_points, (int, np.integer)) or min_points < 1:
            raise ValidationException(f"min_points must be an integer >= 1, got {min_points!r}", "INVALID_MIN_POINTS")
        self.eps_m = eps_m
        self.min_points = int(min_points)

    def __repr__(self):
        return f"DbscanParams(eps_m={self.eps_m}, min_points={self.min_points})"

    def to_dict(self) -> Dict[str, Any]:
        return {"eps_m": self.eps_m, "min_points": self.min_points}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "DbscanParams":
        return DbscanParams(d.get("eps_m", 200.0), d.get("min_points", 10))


class Clustering:
    def __init__(self, labels: Sequence[int], centroids: Sequence[GeoPoint], n_iter: int = 0,
                 objective_history: Optional[List[float]] = None):
        """Per-point labels (NOISE = -1) plus one centroid per cluster id 0..K-1."""
        self.labels = np.asarray(labels, dtype=np.int64)
        self.centroids = list(centroids)
        n_clusters = len(self.centroids)
        if self.labels.size and (self.labels.max() >= n_clusters or self.labels.min() < NOISE):
            raise ValidationException("Cluster labels do not match the centroid list", "INCONSISTENT_LABELS")
        self.clusters: List[List[int]] = [np.flatnonzero(self.labels == c).tolist() for c in range(n_clusters)]
        self.n_iter = n_iter
        self.objective_history = objective_history or []

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    @property
    def sizes(self) -> List[int]:
        return [len(members) for members in self.clusters]

    @property
    def noise(self) -> List[int]:
        return np.flatnonzero(self.labels == NOISE).tolist()

    def __repr__(self):
        return f"<Clustering k={self.n_clusters} sizes={self.sizes} noise={len(self.noise)}>"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "labels": self.labels.tolist(),
            "centroids": [c.to_dict() for c in self.centroids],
            "sizes": self.sizes,
            "n_iter": self.n_iter,
        }


class RepresentativeSet:
    def __init__(self, day: date, key: SlotKey, reps: Sequence[GeoPoint], support: Sequence[int]):
        """The k representative points of one slot, in canonical order."""
        if not 1 <= len(reps) <= 3:
            raise ValidationException(f"A slot has 1 to 3 representatives, got {len(reps)}", "INVALID_REP_COUNT")
        if len(support) != len(reps):
            raise ValidationException("One support count per representative is required", "INVALID_SUPPORT")
        self.date = day
        self.key = key
        self.reps = list(reps)
        self.support = [int(s) for s in support]

    @property
    def k(self) -> int:
        return len(self.reps)

    @property
    def slot(self):
        return (self.date, self.key)

    def __eq__(self, other):
        if not isinstance(other, RepresentativeSet):
            return NotImplemented
        return (self.date, self.key, self.reps, self.support) == (other.date, other.key, other.reps, other.support)

    def __repr__(self):
        return f"<RepresentativeSet {self.date.isoformat()} slot={self.key.slot_index} reps={self.reps} support={self.support}>"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "date": self.date.isoformat(),
            "weekday": self.key.weekday,
            "slot_index": self.key.slot_index,
            "reps": [r.to_dict() for r in self.reps],
            "support": self.support,
        }
