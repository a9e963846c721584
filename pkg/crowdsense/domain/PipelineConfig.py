import json
from typing import Any, Dict, Optional

from .Clustering import DbscanParams
from .Detection import DEFAULT_WARMUP_DAYS, SCORE_METHODS
from .Entropy import ESTIMATORS, EntropyConfig
from .GeoPoint import TIMES_SQUARE, GeoPoint, Region
from .Post import validate_slot_minutes
from .Symbols import GridSpec
from ..exceptions import ConfigurationException, FileIOException, FormatException, ValidationException


class PipelineConfig:
    """Every parameter a pipeline stage reads, validated as a whole."""

    FIELDS = ("center_lat", "center_lon", "radius_km", "side_km", "slot_minutes", "k", "L", "eps_m",
              "min_points", "estimator", "window_weeks", "score_method", "warmup_days", "seed", "joint",
              "tz_offset_minutes", "top_slots", "drop_unscored_specials")

    def __init__(self, center_lat: float = TIMES_SQUARE.lat, center_lon: float = TIMES_SQUARE.lon,
                 radius_km: float = 5.0, side_km: float = 5.0, slot_minutes: int = 15, k: int = 2, L: int = 7,
                 eps_m: float = 200.0, min_points: int = 10, estimator: str = "shannon",
                 window_weeks: Optional[int] = 4, score_method: str = "endpoints",
                 warmup_days: int = DEFAULT_WARMUP_DAYS, seed: int = 7, joint: bool = False,
                 tz_offset_minutes: int = -300, top_slots: int = 0, drop_unscored_specials: bool = False):
        self.center_lat = center_lat
        self.center_lon = center_lon
        self.radius_km = radius_km
        self.side_km = side_km
        self.slot_minutes = slot_minutes
        self.k = k
        self.L = L
        self.eps_m = eps_m
        self.min_points = min_points
        self.estimator = estimator
        self.window_weeks = window_weeks
        self.score_method = score_method
        self.warmup_days = warmup_days
        self.seed = seed
        self.joint = joint
        self.tz_offset_minutes = tz_offset_minutes
        self.top_slots = top_slots
        self.drop_unscored_specials = drop_unscored_specials
        self.validate()

    def validate(self) -> None:
        """Raise ConfigurationException on the first invalid value."""
        try:
            self.center
            self.region
            validate_slot_minutes(self.slot_minutes)
            if self.k not in (1, 2, 3):
                raise ValidationException(f"k must be 1, 2 or 3, got {self.k}", "INVALID_K")
            self.grid
            self.dbscan
            if self.estimator not in ESTIMATORS:
                raise ValidationException(f"estimator must be one of {ESTIMATORS}", "INVALID_ESTIMATOR")
            self.entropy
            if self.score_method not in SCORE_METHODS:
                raise ValidationException(f"score_method must be one of {SCORE_METHODS}", "INVALID_SCORE_METHOD")
            if not isinstance(self.warmup_days, int) or self.warmup_days < 0:
                raise ValidationException(f"warmup_days must be an integer >= 0, got {self.warmup_days}",
                                          "INVALID_WARMUP")
            if not isinstance(self.top_slots, int) or self.top_slots < 0:
                raise ValidationException(f"top_slots must be an integer >= 0, got {self.top_slots}",
                                          "INVALID_TOP_SLOTS")
            if self.joint and self.k == 1:
                raise ValidationException("Joint symbols need k >= 2", "INVALID_JOINT")
        except ConfigurationException:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigurationException(f"Invalid configuration: {str(e)}", "INVALID_CONFIG")

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(self.center_lat, self.center_lon)

    @property
    def region(self) -> Region:
        return Region(self.center, float(self.radius_km) * 1000.0, float(self.side_km) * 1000.0)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.region, self.L)

    @property
    def dbscan(self) -> DbscanParams:
        return DbscanParams(self.eps_m, self.min_points)

    @property
    def entropy(self) -> EntropyConfig:
        return EntropyConfig(self.estimator, self.window_weeks, self.slot_minutes, self.L)

    def alphabet_size(self) -> int:
        """Symbols a stream can take, MISSING included."""
        grid = self.grid
        return grid.n_cells ** self.k + 1 if self.joint else grid.alphabet_size

    def to_dict(self) -> Dict[str, Any]:
        return {f: getattr(self, f) for f in self.FIELDS}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "PipelineConfig":
        unknown = set(d) - set(PipelineConfig.FIELDS)
        if unknown:
            raise ConfigurationException(f"Unknown configuration keys {sorted(unknown)}", "UNKNOWN_CONFIG_KEY")
        return PipelineConfig(**d)

    def overlay(self, **changes) -> "PipelineConfig":
        """Copy with the given non-None values replaced."""
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return PipelineConfig.from_dict(d)

    @staticmethod
    def from_json(path: str) -> "PipelineConfig":
        try:
            with open(path) as f:
                d = json.load(f)
        except FileNotFoundError:
            raise FileIOException(f"Config file '{path}' not found", "FILE_NOT_FOUND")
        except json.JSONDecodeError as e:
            raise FormatException(f"Config file '{path}' is not valid JSON: {str(e)}", "BAD_CONFIG_FILE")
        if not isinstance(d, dict):
            raise FormatException(f"Config file '{path}' must hold a JSON object", "BAD_CONFIG_FILE")
        return PipelineConfig.from_dict(d)

    def write(self, path: str) -> None:
        try:
            with open(path, "w") as f:
                json.dump(self.to_dict(), f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise FileIOException(f"Failed to write config to '{path}': {str(e)}", "WRITE_FAILED")

    def __eq__(self, other):
        if not isinstance(other, PipelineConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"<PipelineConfig {self.to_dict()}>"
