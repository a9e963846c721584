import json
import math
from datetime import date, timedelta
from typing import Any, Dict, List, Optional, Sequence, Union

from .GeoPoint import TIMES_SQUARE, GeoPoint
from ..exceptions import FormatError, IoError, ValidationException

ANOMALY_TYPES = ("crowd_surge", "crowd_absence", "hotspot_shift")

# Hourly intensity shapes; normalized to mean 1 when used
PROFILES: Dict[str, List[float]] = {
    "flat": [1.0] * 24,
    "city": [0.55, 0.5, 0.5, 0.5, 0.5, 0.55, 0.7, 0.85, 1.0, 1.05, 1.1, 1.15,
             1.2, 1.2, 1.15, 1.15, 1.2, 1.3, 1.4, 1.45, 1.4, 1.25, 1.0, 0.75],
    "office": [0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.8, 1.4, 1.7, 1.7, 1.6,
               1.6, 1.7, 1.7, 1.6, 1.4, 1.0, 0.6, 0.4, 0.4, 0.4, 0.4, 0.4],
    "nightlife": [1.6, 1.4, 1.1, 0.7, 0.4, 0.3, 0.3, 0.3, 0.4, 0.5, 0.6, 0.7,
                  0.8, 0.8, 0.8, 0.9, 1.0, 1.1, 1.3, 1.5, 1.7, 1.9, 2.0, 1.9],
}

# Average posts per weekday (Monday first) observed around Times Square
WEEKDAY_AVERAGES = [22789.22, 22564.19, 22604.44, 23311.59, 23006.30, 23071.22, 23241.19]


def normalized(values: Sequence[float]) -> List[float]:
    mean = math.fsum(values) / len(values)
    return [v / mean for v in values]


def resolve_profile(profile: Union[str, Sequence[float]]) -> List[float]:
    if isinstance(profile, str):
        if profile not in PROFILES:
            raise ValidationException(f"Unknown intensity profile '{profile}'", "INVALID_PROFILE")
        values = PROFILES[profile]
    else:
        values = [float(v) for v in profile]
    if len(values) != 24 or any(v < 0 or not math.isfinite(v) for v in values) or sum(values) <= 0:
        raise ValidationException("An intensity profile has 24 non-negative hourly values", "INVALID_PROFILE")
    return normalized(values)


class Hotspot:
    def __init__(self, name: str, center: GeoPoint, spread_m: float = 150.0, weight: float = 1.0,
                 profile: Union[str, Sequence[float]] = "city"):
        """Gaussian blob of posts around `center` with an hourly intensity profile."""
        if spread_m <= 0:
            raise ValidationException(f"Hotspot spread must be > 0, got {spread_m}", "INVALID_SPREAD")
        if weight < 0:
            raise ValidationException(f"Hotspot weight must be >= 0, got {weight}", "INVALID_WEIGHT")
        self.name = name
        self.center = center
        self.spread_m = float(spread_m)
        self.weight = float(weight)
        self.profile = profile
        self.hourly = resolve_profile(profile)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lat": self.center.lat, "lon": self.center.lon, "spread_m": self.spread_m,
                "weight": self.weight, "profile": self.profile if isinstance(self.profile, str) else list(self.profile)}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "Hotspot":
        return Hotspot(d.get("name", ""), GeoPoint(d.get("lat"), d.get("lon")), d.get("spread_m", 150.0),
                       d.get("weight", 1.0), d.get("profile", "city"))

    def __repr__(self):
        return f"<Hotspot {self.name} {self.center!r} w={self.weight}>"


class Anomaly:
    def __init__(self, day: date, type: str, magnitude: float, start_minute: int = 0, end_minute: int = 1440,
                 hotspot: Optional[int] = None, bearing_deg: float = 90.0, label: Optional[str] = None):
        """crowd_surge / crowd_absence multiply intensities by `magnitude`; hotspot_shift moves a hotspot by `magnitude` meters."""
        if type not in ANOMALY_TYPES:
            raise ValidationException(f"Unknown anomaly type '{type}', expected one of {ANOMALY_TYPES}",
                                      "INVALID_ANOMALY_TYPE")
        if magnitude < 0 or not math.isfinite(magnitude):
            raise ValidationException(f"Anomaly magnitude must be finite and >= 0, got {magnitude}",
                                      "INVALID_MAGNITUDE")
        if not 0 <= start_minute < end_minute <= 1440:
            raise ValidationException(f"Bad anomaly window [{start_minute}, {end_minute})", "INVALID_ANOMALY_WINDOW")
        self.date = day
        self.type = type
        self.magnitude = float(magnitude)
        self.start_minute = int(start_minute)
        self.end_minute = int(end_minute)
        self.hotspot = hotspot
        self.bearing_deg = float(bearing_deg)
        self.label = label or type

    def covers(self, minute: int) -> bool:
        return self.start_minute <= minute < self.end_minute

    def to_dict(self) -> Dict[str, Any]:
        return {"date": self.date.isoformat(), "type": self.type, "magnitude": self.magnitude,
                "start_minute": self.start_minute, "end_minute": self.end_minute, "hotspot": self.hotspot,
                "bearing_deg": self.bearing_deg, "label": self.label}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "Anomaly":
        return Anomaly(date.fromisoformat(d["date"]), d["type"], d["magnitude"], d.get("start_minute", 0),
                       d.get("end_minute", 1440), d.get("hotspot"), d.get("bearing_deg", 90.0), d.get("label"))

    def __repr__(self):
        return f"<Anomaly {self.date.isoformat()} {self.type} x{self.magnitude}>"


class Scenario:
    def __init__(self, name: str, seed: int, start: date, days: int, hotspots: Sequence[Hotspot],
                 anomalies: Sequence[Anomaly] = (), posts_per_day: float = 22_800.0,
                 center: GeoPoint = TIMES_SQUARE, background_weight: float = 0.05,
                 background_radius_m: float = 4_500.0, weekday_multipliers: Optional[Sequence[float]] = None,
                 tz_offset_minutes: int = -300, switch_day: Optional[int] = None,
                 switched_hotspots: Sequence[Hotspot] = ()):
        """Seeded synthetic post stream: a hotspot mixture over `days` days starting at `start` (local time)."""
        if days < 1:
            raise ValidationException(f"A scenario covers at least one day, got {days}", "INVALID_PERIOD")
        if not hotspots:
            raise ValidationException("A scenario needs at least one hotspot", "NO_HOTSPOTS")
        if posts_per_day <= 0 or background_weight < 0 or background_radius_m <= 0:
            raise ValidationException("posts_per_day and background radius must be > 0, weight >= 0",
                                      "INVALID_SCENARIO")
        if switch_day is not None and (not 0 < switch_day < days or len(switched_hotspots) != len(hotspots)):
            raise ValidationException("A layout switch needs a day inside the period and one hotspot per hotspot",
                                      "INVALID_SWITCH")
        end = start + timedelta(days=days - 1)
        for a in anomalies:
            if not start <= a.date <= end:
                raise ValidationException(f"Anomaly date {a.date} outside {start}..{end}", "ANOMALY_OUT_OF_PERIOD")
            if a.hotspot is not None and not 0 <= a.hotspot < len(hotspots):
                raise ValidationException(f"Anomaly hotspot index {a.hotspot} out of range", "INVALID_HOTSPOT")
        multipliers = list(weekday_multipliers) if weekday_multipliers is not None else [1.0] * 7
        if len(multipliers) != 7 or any(m < 0 for m in multipliers):
            raise ValidationException("weekday_multipliers needs 7 non-negative values", "INVALID_WEEKDAYS")
        self.name = name
        self.seed = int(seed)
        self.start = start
        self.days = int(days)
        self.hotspots = list(hotspots)
        self.anomalies = sorted(anomalies, key=lambda a: (a.date, a.start_minute, a.type))
        self.posts_per_day = float(posts_per_day)
        self.center = center
        self.background_weight = float(background_weight)
        self.background_radius_m = float(background_radius_m)
        self.weekday_multipliers = multipliers
        self.tz_offset_minutes = int(tz_offset_minutes)
        self.switch_day = switch_day
        self.switched_hotspots = list(switched_hotspots)

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.days - 1)

    @property
    def period(self):
        return self.start, self.end

    def layout_for(self, day: date) -> List[Hotspot]:
        if self.switch_day is not None and (day - self.start).days >= self.switch_day:
            return self.switched_hotspots
        return self.hotspots

    def with_overrides(self, seed: Optional[int] = None, posts_per_day: Optional[float] = None) -> "Scenario":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if posts_per_day is not None:
            d["posts_per_day"] = posts_per_day
        return Scenario.from_dict(d)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "start": self.start.isoformat(),
            "days": self.days,
            "posts_per_day": self.posts_per_day,
            "center": self.center.to_dict(),
            "background_weight": self.background_weight,
            "background_radius_m": self.background_radius_m,
            "weekday_multipliers": self.weekday_multipliers,
            "tz_offset_minutes": self.tz_offset_minutes,
            "hotspots": [h.to_dict() for h in self.hotspots],
            "anomalies": [a.to_dict() for a in self.anomalies],
            "switch_day": self.switch_day,
            "switched_hotspots": [h.to_dict() for h in self.switched_hotspots],
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "Scenario":
        try:
            return Scenario(
                d.get("name", "custom"), d.get("seed", 0), date.fromisoformat(d["start"]), d["days"],
                [Hotspot.from_dict(h) for h in d.get("hotspots", [])],
                [Anomaly.from_dict(a) for a in d.get("anomalies", [])],
                d.get("posts_per_day", 22_800.0),
                GeoPoint.from_dict(d["center"]) if "center" in d else TIMES_SQUARE,
                d.get("background_weight", 0.05), d.get("background_radius_m", 4_500.0),
                d.get("weekday_multipliers"), d.get("tz_offset_minutes", -300), d.get("switch_day"),
                [Hotspot.from_dict(h) for h in d.get("switched_hotspots", [])],
            )
        except KeyError as e:
            raise ValidationException(f"Scenario is missing field {str(e)}", "INVALID_SCENARIO")

    @staticmethod
    def from_json(path: str) -> "Scenario":
        try:
            with open(path) as f:
                d = json.load(f)
        except FileNotFoundError:
            raise IoError(f"Scenario file '{path}' not found", "FILE_NOT_FOUND")
        except json.JSONDecodeError as e:
            raise FormatError(f"Scenario file '{path}' is not valid JSON: {str(e)}", "BAD_SCENARIO_FILE")
        return Scenario.from_dict(d)

    def to_json(self, path: str) -> None:
        try:
            with open(path, "w") as f:
                json.dump(self.to_dict(), f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise IoError(f"Failed to write scenario to '{path}': {str(e)}", "WRITE_FAILED")

    def __repr__(self):
        return f"<Scenario {self.name} {self.start}..{self.end} hotspots={len(self.hotspots)} anomalies={len(self.anomalies)}>"
