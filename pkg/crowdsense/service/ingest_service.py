"""Post ingestion: parse CSV/JSONL files, filter to region and period, bucket by (date, slot)."""

import json
import logging
import os
from datetime import date, timedelta
from typing import Dict, Iterable, Iterator, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..domain.GeoPoint import GeoPoint, Region
from ..domain.Post import IngestStats, PostRecord, SlotBucket, SlotKey, validate_slot_minutes
from ..exceptions import FormatError, IoError, ValidationException
from . import geo_service

logger = logging.getLogger(__name__)

DEFAULT_FIELD_MAP = {"ts": "ts", "lat": "lat", "lon": "lon", "id": "id"}
DEFAULT_TZ_OFFSET_MINUTES = -300
MALFORMED_LIMIT = 0.5
# 9999-12-31T23:59:59Z
MAX_EPOCH_SECONDS = 253_402_300_799
CHUNK_ROWS = 200_000
COORD_FORMAT = "%.7f"

_EPOCH = pd.Timestamp(0, tz="UTC")
_EPOCH_DATE = date(1970, 1, 1)

BucketMap = Dict[Tuple[date, SlotKey], SlotBucket]


def _resolve_field_map(field_map: Optional[Dict[str, str]]) -> Dict[str, str]:
    resolved = dict(DEFAULT_FIELD_MAP)
    if field_map:
        unknown = set(field_map) - set(DEFAULT_FIELD_MAP)
        if unknown:
            raise ValidationException(f"Unknown field_map keys: {sorted(unknown)}", "INVALID_FIELD_MAP")
        resolved.update(field_map)
    return resolved


def detect_format(path: str) -> str:
    return "jsonl" if str(path).lower().endswith((".jsonl", ".ndjson", ".json")) else "csv"


class _TimestampParser:
    """Decides once per file whether the timestamp column holds epoch seconds or ISO-8601."""

    def __init__(self):
        self.mode: Optional[str] = None

    def __call__(self, raw: pd.Series) -> pd.Series:
        raw = raw.astype(str).str.strip()
        numeric = pd.to_numeric(raw, errors="coerce")
        if self.mode is None:
            non_empty = raw[raw != ""]
            share = numeric.notna().sum() / max(1, len(non_empty))
            self.mode = "epoch" if share >= 0.5 else "iso"
            logger.debug(f"Timestamp column detected as {self.mode}")
        if self.mode == "epoch":
            numeric = numeric.where(numeric.abs() <= MAX_EPOCH_SECONDS)
            return np.floor(numeric)
        parsed = pd.to_datetime(raw, utc=True, errors="coerce", format="ISO8601")
        return (parsed - _EPOCH) // pd.Timedelta(seconds=1)


def _clean_chunk(chunk: pd.DataFrame, fields: Dict[str, str], ts_parser: _TimestampParser,
                 stats: IngestStats) -> pd.DataFrame:
    """Validate one raw chunk (all values as strings); count and drop malformed rows."""
    ts = ts_parser(chunk[fields["ts"]])
    lat = pd.to_numeric(chunk[fields["lat"]].astype(str).str.strip(), errors="coerce")
    lon = pd.to_numeric(chunk[fields["lon"]].astype(str).str.strip(), errors="coerce")
    ok = (ts.notna() & lat.notna() & lon.notna()
          & np.isfinite(lat) & np.isfinite(lon)
          & lat.between(-90.0, 90.0) & lon.between(-180.0, 180.0))
    malformed = int((~ok).sum())
    stats.malformed += malformed
    stats.parsed += int(ok.sum())
    if fields["id"] in chunk.columns:
        ids = chunk[fields["id"]].astype(str).where(chunk[fields["id"]].astype(str) != "", None)
    else:
        ids = pd.Series([None] * len(chunk), index=chunk.index, dtype=object)
    return pd.DataFrame({
        "id": ids[ok].to_numpy(dtype=object),
        "ts": ts[ok].astype(np.int64).to_numpy(),
        "lat": lat[ok].astype(float).to_numpy(),
        "lon": lon[ok].astype(float).to_numpy(),
    })


def _csv_chunks(path: str, fields: Dict[str, str], chunksize: int,
                stats: IngestStats) -> Iterator[pd.DataFrame]:
    def bad_line(fields_seen):
        # too many fields; short rows come through padded and fail validation
        stats.malformed += 1
        return None

    reader = pd.read_csv(path, dtype=str, keep_default_na=False, chunksize=chunksize, engine="python",
                         on_bad_lines=bad_line, skipinitialspace=True)
    first = True
    for chunk in reader:
        if first:
            missing = [fields[k] for k in ("ts", "lat", "lon") if fields[k] not in chunk.columns]
            if missing:
                raise FormatError(f"CSV header lacks columns {missing} (check the field map)", "MISSING_COLUMNS")
            first = False
        yield chunk


def _jsonl_chunks(path: str, fields: Dict[str, str], chunksize: int,
                  stats: IngestStats) -> Iterator[pd.DataFrame]:
    keys = [fields["ts"], fields["lat"], fields["lon"], fields["id"]]
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                stats.malformed += 1
                continue
            if not isinstance(obj, dict):
                stats.malformed += 1
                continue
            rows.append(["" if obj.get(k) is None else str(obj.get(k)) for k in keys])
            if len(rows) >= chunksize:
                yield pd.DataFrame(rows, columns=keys)
                rows = []
    if rows:
        yield pd.DataFrame(rows, columns=keys)


def iter_post_frames(path: str, format: Optional[str] = None, field_map: Optional[Dict[str, str]] = None,
                     stats: Optional[IngestStats] = None, chunksize: int = CHUNK_ROWS) -> Iterator[pd.DataFrame]:
    """Yield validated frames (id, ts, lat, lon) in file order.

    Raises FormatError at the end of the stream when more than half of the rows were malformed.
    """
    fields = _resolve_field_map(field_map)
    stats = stats if stats is not None else IngestStats()
    fmt = (format or detect_format(path)).lower()
    if fmt not in ("csv", "jsonl"):
        raise ValidationException(f"Unsupported post format '{fmt}'", "INVALID_FORMAT")
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise IoError(f"Cannot read post file '{path}'", "UNREADABLE_FILE")

    ts_parser = _TimestampParser()
    try:
        if fmt == "csv":
            chunks = _csv_chunks(path, fields, chunksize, stats)
        else:
            chunks = _jsonl_chunks(path, fields, chunksize, stats)
        for chunk in chunks:
            yield _clean_chunk(chunk, fields, ts_parser, stats)
    except pd.errors.EmptyDataError:
        raise FormatError(f"Post file '{path}' is empty", "EMPTY_FILE")
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"Failed to read {path}: {str(e)}")
        raise IoError(f"Failed to read post file '{path}': {str(e)}", "READ_FAILED")

    if stats.total_rows and stats.malformed / stats.total_rows > MALFORMED_LIMIT:
        raise FormatError(
            f"{stats.malformed} of {stats.total_rows} rows malformed in '{path}' (check the field map)",
            "TOO_MANY_MALFORMED")
    if stats.malformed:
        logger.info(f"Skipped {stats.malformed} malformed rows in {path}")


def load_posts(path: str, format: Optional[str] = None, field_map: Optional[Dict[str, str]] = None,
               stats: Optional[IngestStats] = None) -> Iterator[PostRecord]:
    """Stream PostRecords from a CSV or JSONL file; malformed rows are counted and skipped."""
    for frame in iter_post_frames(path, format, field_map, stats):
        for pid, ts, lat, lon in zip(frame["id"].tolist(), frame["ts"].tolist(),
                                     frame["lat"].tolist(), frame["lon"].tolist()):
            yield PostRecord(int(ts), GeoPoint(lat, lon), pid)


def load_posts_frame(path: str, format: Optional[str] = None, field_map: Optional[Dict[str, str]] = None,
                     stats: Optional[IngestStats] = None) -> pd.DataFrame:
    """Read the whole file into one validated frame."""
    frames = list(iter_post_frames(path, format, field_map, stats))
    if not frames:
        return pd.DataFrame({"id": pd.Series(dtype=object), "ts": pd.Series(dtype=np.int64),
                             "lat": pd.Series(dtype=float), "lon": pd.Series(dtype=float)})
    return pd.concat(frames, ignore_index=True)


def posts_to_frame(posts: Iterable[PostRecord]) -> pd.DataFrame:
    rows = [(p.id, p.ts, p.loc.lat, p.loc.lon) for p in posts]
    return pd.DataFrame({
        "id": pd.Series([r[0] for r in rows], dtype=object),
        "ts": pd.Series([r[1] for r in rows], dtype=np.int64),
        "lat": pd.Series([r[2] for r in rows], dtype=float),
        "lon": pd.Series([r[3] for r in rows], dtype=float),
    })


def write_posts(frame: pd.DataFrame, path: str, format: Optional[str] = None) -> None:
    """Write posts in the format `load_posts` reads (epoch-second timestamps)."""
    fmt = (format or detect_format(path)).lower()
    out = frame[["id", "ts", "lat", "lon"]]
    try:
        if fmt == "csv":
            out.to_csv(path, index=False, float_format=COORD_FORMAT, lineterminator="\n")
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for pid, ts, lat, lon in zip(out["id"].tolist(), out["ts"].tolist(),
                                             out["lat"].tolist(), out["lon"].tolist()):
                    fh.write(json.dumps({"id": pid, "ts": int(ts), "lat": float(COORD_FORMAT % lat),
                                         "lon": float(COORD_FORMAT % lon)}) + "\n")
    except OSError as e:
        raise IoError(f"Failed to write posts to '{path}': {str(e)}", "WRITE_FAILED")


def bucket(posts: Union[Iterable[PostRecord], pd.DataFrame], region: Region, period: Tuple[date, date],
           slot_minutes: int = 15, timezone_offset_minutes: int = DEFAULT_TZ_OFFSET_MINUTES,
           stats: Optional[IngestStats] = None) -> BucketMap:
    """Group posts into (date, SlotKey) buckets in local time.

    Posts outside the period or farther than radius_m from the center are dropped and counted.
    Bucket contents are sorted so the result does not depend on input order.
    """
    slot_minutes = validate_slot_minutes(slot_minutes)
    start, end = period
    if start > end:
        raise ValidationException(f"Period start {start} is after end {end}", "INVALID_PERIOD")
    stats = stats if stats is not None else IngestStats()
    frame = posts if isinstance(posts, pd.DataFrame) else posts_to_frame(posts)
    if not isinstance(posts, pd.DataFrame):
        stats.parsed = max(stats.parsed, len(frame))
    if len(frame) == 0:
        return {}

    ts = frame["ts"].to_numpy(dtype=np.int64)
    lat = frame["lat"].to_numpy(dtype=float)
    lon = frame["lon"].to_numpy(dtype=float)
    ids = frame["id"].to_numpy(dtype=object) if "id" in frame.columns else np.full(len(frame), None, dtype=object)

    local = ts + int(timezone_offset_minutes) * 60
    day_index = np.floor_divide(local, 86400)
    minute = np.floor_divide(np.mod(local, 86400), 60)
    slot = minute // slot_minutes

    in_period = (day_index >= (start - _EPOCH_DATE).days) & (day_index <= (end - _EPOCH_DATE).days)
    stats.outside_period += int((~in_period).sum())
    dist = geo_service.haversine_array(lat, lon, region.center.lat, region.center.lon)
    in_region = dist <= region.radius_m
    stats.outside_region += int((in_period & ~in_region).sum())
    keep = in_period & in_region
    stats.retained += int(keep.sum())

    ts, lat, lon, ids = ts[keep], lat[keep], lon[keep], ids[keep]
    day_index, slot = day_index[keep], slot[keep]
    id_keys = np.array(["" if i is None else str(i) for i in ids], dtype=object)
    order = np.lexsort((id_keys, lon, lat, ts, slot, day_index))
    ts, lat, lon, ids = ts[order], lat[order], lon[order], ids[order]
    day_index, slot = day_index[order], slot[order]

    buckets: BucketMap = {}
    if ts.size == 0:
        return buckets
    group = day_index * (1440 // slot_minutes) + slot
    boundaries = np.flatnonzero(np.diff(group)) + 1
    starts = np.concatenate(([0], boundaries))
    stops = np.concatenate((boundaries, [ts.size]))
    for a, b in zip(starts.tolist(), stops.tolist()):
        day = _EPOCH_DATE + timedelta(days=int(day_index[a]))
        key = SlotKey(day.weekday(), int(slot[a]), slot_minutes)
        buckets[(day, key)] = SlotBucket(key, day, lat[a:b], lon[a:b], ts[a:b], list(ids[a:b]))
    logger.info(f"Bucketed {stats.retained} posts into {len(buckets)} slots "
                f"({stats.outside_region} outside region, {stats.outside_period} outside period)")
    return buckets


def write_buckets(buckets: BucketMap, path: str) -> None:
    """One row per retained post: date, weekday, slot_index, lat, lon."""
    rows_date, rows_wd, rows_slot, lats, lons = [], [], [], [], []
    for (day, key) in sorted(buckets):
        b = buckets[(day, key)]
        n = len(b)
        rows_date.extend([day.isoformat()] * n)
        rows_wd.extend([key.weekday] * n)
        rows_slot.extend([key.slot_index] * n)
        lats.append(b.lats)
        lons.append(b.lons)
    frame = pd.DataFrame({
        "date": rows_date,
        "weekday": np.asarray(rows_wd, dtype=np.int64),
        "slot_index": np.asarray(rows_slot, dtype=np.int64),
        "lat": np.concatenate(lats) if lats else np.empty(0),
        "lon": np.concatenate(lons) if lons else np.empty(0),
    })
    try:
        frame.to_csv(path, index=False, float_format=COORD_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write buckets to '{path}': {str(e)}", "WRITE_FAILED")


def read_buckets(path: str, slot_minutes: int) -> BucketMap:
    """Inverse of `write_buckets`."""
    try:
        frame = pd.read_csv(path, dtype={"date": str, "weekday": np.int64, "slot_index": np.int64,
                                         "lat": float, "lon": float})
    except FileNotFoundError:
        raise IoError(f"Bucket file '{path}' not found", "FILE_NOT_FOUND")
    except (ValueError, KeyError) as e:
        raise FormatError(f"Bucket file '{path}' is malformed: {str(e)}", "BAD_BUCKET_FILE")
    missing = {"date", "slot_index", "lat", "lon"} - set(frame.columns)
    if missing:
        raise FormatError(f"Bucket file '{path}' lacks columns {sorted(missing)}", "BAD_BUCKET_FILE")
    buckets: BucketMap = {}
    for (day_s, slot_index), grp in frame.groupby(["date", "slot_index"], sort=True):
        day = date.fromisoformat(day_s)
        key = SlotKey(day.weekday(), int(slot_index), slot_minutes)
        buckets[(day, key)] = SlotBucket(key, day, grp["lat"].to_numpy(), grp["lon"].to_numpy())
    return buckets


def date_range(period: Tuple[date, date]):
    start, end = period
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]
