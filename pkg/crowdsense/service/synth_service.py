"""Seeded synthetic post streams with planted crowd anomalies and their ground-truth labels.

Each native 15-minute slot draws Poisson counts per hotspot (and for the
uniform background disc) with rate

    posts_per_day / 96 * weight * hourly_profile * weekday_multiplier * anomaly_factor

and scatters the posts with an isotropic Gaussian around the hotspot center.
Random draws come from numpy's PCG64 bit generator in a fixed order (day,
component, then counts, positions, seconds), so a seed reproduces the stream
bit for bit.
"""

import logging
import math
from datetime import date, timedelta
from typing import Iterator, List, Tuple

import numpy as np
import pandas as pd
from numpy.random import PCG64, Generator

from ..domain.Detection import NYC_2015_EVENTS, SpecialDaySet
from ..domain.GeoPoint import TIMES_SQUARE, GeoPoint, Region
from ..domain.Post import PostRecord
from ..domain.Scenario import WEEKDAY_AVERAGES, Anomaly, Hotspot, Scenario, normalized
from ..exceptions import ValidationException
from . import geo_service

logger = logging.getLogger(__name__)

NATIVE_SLOT_MINUTES = 15
NATIVE_SLOTS = 1440 // NATIVE_SLOT_MINUTES
# 7x7 grid over the 5 km square
CELL_M = 5000.0 / 7


def _rng(seed: int) -> Generator:
    return Generator(PCG64(seed))


def _slot_hours() -> np.ndarray:
    return (np.arange(NATIVE_SLOTS) * NATIVE_SLOT_MINUTES) // 60


def _default_target(hotspots: List[Hotspot], anomaly: Anomaly) -> int:
    if anomaly.hotspot is not None:
        return anomaly.hotspot
    weights = [h.weight for h in hotspots]
    if anomaly.type == "hotspot_shift":
        # dominant hotspot
        return max(range(len(weights)), key=lambda i: (weights[i], -i))
    # minor hotspot
    return min(range(len(weights)), key=lambda i: (weights[i], i))


def _day_components(scenario: Scenario, day: date):
    """(center, spread, rate per slot) for every hotspot plus the background, for one day."""
    hotspots = scenario.layout_for(day)
    total_w = math.fsum(h.weight for h in hotspots) + scenario.background_weight
    if total_w <= 0:
        raise ValidationException("Scenario weights sum to zero", "INVALID_WEIGHT")
    base = scenario.posts_per_day / NATIVE_SLOTS * scenario.weekday_multipliers[day.weekday()]
    hours = _slot_hours()
    minutes = np.arange(NATIVE_SLOTS) * NATIVE_SLOT_MINUTES

    centers = [h.center for h in hotspots]
    rates = [base * h.weight / total_w * np.asarray(h.hourly)[hours] for h in hotspots]
    bg_rate = base * scenario.background_weight / total_w * np.ones(NATIVE_SLOTS)
    shifts = [np.zeros((NATIVE_SLOTS, 2)) for _ in hotspots]

    for a in scenario.anomalies:
        if a.date != day:
            continue
        window = (minutes >= a.start_minute) & (minutes < a.end_minute)
        if a.type == "crowd_absence":
            for r in rates:
                r[window] *= a.magnitude
            bg_rate[window] *= a.magnitude
        elif a.type == "crowd_surge":
            rates[_default_target(hotspots, a)][window] *= a.magnitude
        else:
            theta = math.radians(a.bearing_deg)
            shifts[_default_target(hotspots, a)][window] += (a.magnitude * math.sin(theta),
                                                             a.magnitude * math.cos(theta))
    return hotspots, centers, rates, shifts, bg_rate


def _local_day_start(day: date, tz_offset_minutes: int) -> int:
    """UTC epoch second of local midnight."""
    return (day - date(1970, 1, 1)).days * 86400 - tz_offset_minutes * 60


def _draw_day(rng: Generator, scenario: Scenario, day: date) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    hotspots, centers, rates, shifts, bg_rate = _day_components(scenario, day)
    day_start = _local_day_start(day, scenario.tz_offset_minutes)
    all_ts, all_lat, all_lon = [], [], []

    for h, center, rate, shift in zip(hotspots, centers, rates, shifts):
        counts = rng.poisson(rate)
        n = int(counts.sum())
        slot_of = np.repeat(np.arange(NATIVE_SLOTS), counts)
        east = rng.normal(0.0, h.spread_m, n) + shift[slot_of, 0]
        north = rng.normal(0.0, h.spread_m, n) + shift[slot_of, 1]
        seconds = rng.integers(0, NATIVE_SLOT_MINUTES * 60, n)
        lats, lons = geo_service.from_local_xy(east, north, center)
        all_ts.append(day_start + slot_of * NATIVE_SLOT_MINUTES * 60 + seconds)
        all_lat.append(lats)
        all_lon.append(lons)

    counts = rng.poisson(bg_rate)
    n = int(counts.sum())
    slot_of = np.repeat(np.arange(NATIVE_SLOTS), counts)
    radius = scenario.background_radius_m * np.sqrt(rng.random(n))
    angle = 2.0 * math.pi * rng.random(n)
    seconds = rng.integers(0, NATIVE_SLOT_MINUTES * 60, n)
    lats, lons = geo_service.from_local_xy(radius * np.cos(angle), radius * np.sin(angle), scenario.center)
    all_ts.append(day_start + slot_of * NATIVE_SLOT_MINUTES * 60 + seconds)
    all_lat.append(lats)
    all_lon.append(lons)

    ts = np.concatenate(all_ts).astype(np.int64)
    lat = np.clip(np.concatenate(all_lat), -90.0, 90.0)
    lon = np.concatenate(all_lon)
    order = np.argsort(ts, kind="stable")
    return ts[order], lat[order], lon[order]


def ground_truth(scenario: Scenario) -> SpecialDaySet:
    return SpecialDaySet.from_events((a.date, a.label) for a in scenario.anomalies)


def generate_frame(scenario: Scenario) -> Tuple[pd.DataFrame, SpecialDaySet]:
    """All posts of the scenario as an (id, ts, lat, lon) frame sorted by time, plus the planted special days."""
    rng = _rng(scenario.seed)
    frames_ts, frames_lat, frames_lon = [], [], []
    for i in range(scenario.days):
        ts, lat, lon = _draw_day(rng, scenario, scenario.start + timedelta(days=i))
        frames_ts.append(ts)
        frames_lat.append(lat)
        frames_lon.append(lon)
    ts = np.concatenate(frames_ts)
    frame = pd.DataFrame({
        "id": [f"p{i:08d}" for i in range(ts.size)],
        "ts": ts,
        "lat": np.concatenate(frames_lat),
        "lon": np.concatenate(frames_lon),
    })
    specials = ground_truth(scenario)
    logger.info(f"Generated {len(frame)} posts over {scenario.days} days "
                f"({len(scenario.anomalies)} planted anomalies on {len(specials)} dates)")
    return frame, specials


def generate(scenario: Scenario) -> Tuple[Iterator[PostRecord], SpecialDaySet]:
    """Stream of PostRecord plus the ground-truth special days."""
    frame, specials = generate_frame(scenario)

    def records():
        for pid, ts, lat, lon in zip(frame["id"].tolist(), frame["ts"].tolist(),
                                     frame["lat"].tolist(), frame["lon"].tolist()):
            yield PostRecord(int(ts), GeoPoint(lat, lon), pid)

    return records(), specials


def scenario_region(scenario: Scenario, radius_km: float = 5.0) -> Region:
    return Region(scenario.center, radius_km * 1000.0)


# ---------- built-in scenarios ----------

def _cell(center: GeoPoint, east_cells: float, north_cells: float) -> GeoPoint:
    return geo_service.offset_point(center, east_cells * CELL_M, north_cells * CELL_M)


def manhattan_hotspots(center: GeoPoint = TIMES_SQUARE) -> List[Hotspot]:
    """Two dominant hotspots and two minor ones, each at a 7x7 cell center."""
    return [
        Hotspot("square", _cell(center, 0, 0), 150.0, 0.40, "city"),
        Hotspot("offices", _cell(center, -3, -1), 180.0, 0.30, "office"),
        Hotspot("park", _cell(center, 0, 2), 160.0, 0.10, "city"),
        Hotspot("theatres", _cell(center, 0, -2), 160.0, 0.08, "nightlife"),
    ]


def weekday_multipliers() -> List[float]:
    return normalized(WEEKDAY_AVERAGES)


def _planted(day: date, kind: str, label: str) -> Anomaly:
    if kind == "surge":
        return Anomaly(day, "crowd_surge", 8.0, 10 * 60, 23 * 60, label=label)
    if kind == "absence":
        return Anomaly(day, "crowd_absence", 0.1, 0, 1440, label=label)
    if kind == "shift":
        return Anomaly(day, "hotspot_shift", 1500.0, 9 * 60, 22 * 60, bearing_deg=45.0, label=label)
    raise ValidationException(f"Unknown planted anomaly kind '{kind}'", "INVALID_ANOMALY_TYPE")


NYC_LIKE_START = date(2015, 8, 23)
NYC_LIKE_PLAN = [(35, "surge"), (52, "absence"), (69, "shift"), (88, "surge"),
                 (103, "shift"), (121, "absence"), (140, "surge"), (163, "shift")]

# event label -> planted anomaly kind
NYC_2015_KINDS = {
    "Labor Day": "absence", "Columbus Day": "surge", "Halloween": "surge", "Veterans Day": "surge",
    "Thanksgiving": "shift", "Christmas Eve": "surge", "Christmas": "absence", "New Year's Eve": "shift",
    "New Year": "absence", "Jonas Storm": "absence",
}


def nyc_like(seed: int = 7, posts_per_day: float = 22_800.0, weeks: int = 26) -> Scenario:
    """26 weeks around Times Square with 8 planted anomaly days after the first month."""
    days = weeks * 7
    anomalies = [_planted(NYC_LIKE_START + timedelta(days=off), kind, f"planted {kind}")
                 for off, kind in NYC_LIKE_PLAN if off < days]
    return Scenario("nyc-like", seed, NYC_LIKE_START, days, manhattan_hotspots(), anomalies, posts_per_day,
                    weekday_multipliers=weekday_multipliers())


def nyc_2015(seed: int = 7, posts_per_day: float = 22_800.0) -> Scenario:
    """190 days, 2015-08-23 .. 2016-02-28, with anomalies on the city's special events."""
    start = date(2015, 8, 23)
    anomalies = [_planted(day, NYC_2015_KINDS[label], label) for day, label in NYC_2015_EVENTS]
    return Scenario("nyc-2015", seed, start, 190, manhattan_hotspots(), anomalies, posts_per_day,
                    weekday_multipliers=weekday_multipliers())


def two_regime(seed: int = 7, posts_per_day: float = 22_800.0, weeks: int = 16, switch_week: int = 8) -> Scenario:
    """The offices hotspot relocates across the grid at `switch_week`; no anomalies."""
    before = manhattan_hotspots()
    after = list(before)
    after[1] = Hotspot("offices", _cell(TIMES_SQUARE, 3, 2), 180.0, 0.30, "office")
    return Scenario("two-regime", seed, NYC_LIKE_START, weeks * 7, before, (), posts_per_day,
                    weekday_multipliers=weekday_multipliers(), switch_day=switch_week * 7,
                    switched_hotspots=after)


BUILTIN_SCENARIOS = {"nyc-like": nyc_like, "nyc-2015": nyc_2015, "two-regime": two_regime}


def load_scenario(name_or_path: str) -> Scenario:
    """Built-in scenario by name, otherwise a JSON scenario file."""
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path]()
    return Scenario.from_json(name_or_path)
