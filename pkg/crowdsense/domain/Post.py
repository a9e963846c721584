from datetime import date, datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np

from .GeoPoint import GeoPoint
from ..exceptions import ValidationException


class PostRecord:
    __slots__ = ("ts", "loc", "id")

    def __init__(self, ts: int, loc: GeoPoint, id: Optional[str] = None):
        """One geo-located post: UTC epoch seconds plus location."""
        if isinstance(ts, bool) or not isinstance(ts, (int, np.integer)):
            raise ValidationException(f"Timestamp must be integer epoch seconds, got {ts!r}", "INVALID_TIMESTAMP")
        if not isinstance(loc, GeoPoint):
            raise ValidationException("Post location must be a GeoPoint", "INVALID_LOCATION")
        self.ts = int(ts)
        self.loc = loc
        self.id = id

    def __eq__(self, other):
        if not isinstance(other, PostRecord):
            return NotImplemented
        return (self.ts, self.loc, self.id) == (other.ts, other.loc, other.id)

    def __hash__(self):
        return hash((self.ts, self.loc, self.id))

    def __repr__(self):
        when = datetime.fromtimestamp(self.ts, tz=timezone.utc).isoformat()
        return f"<PostRecord {self.id or '-'} {when} {self.loc!r}>"

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "ts": self.ts, "lat": self.loc.lat, "lon": self.loc.lon}


def validate_slot_minutes(slot_minutes: int) -> int:
    if isinstance(slot_minutes, bool) or not isinstance(slot_minutes, (int, np.integer)):
        raise ValidationException(f"slot_minutes must be an integer, got {slot_minutes!r}", "INVALID_SLOT_MINUTES")
    if slot_minutes <= 0 or 1440 % slot_minutes != 0:
        raise ValidationException(f"slot_minutes must divide 1440, got {slot_minutes}", "INVALID_SLOT_MINUTES")
    return int(slot_minutes)


class SlotKey:
    __slots__ = ("weekday", "slot_index", "slot_minutes")

    def __init__(self, weekday: int, slot_index: int, slot_minutes: int = 15):
        """Weekday (Monday=0) and slot index within the day."""
        slot_minutes = validate_slot_minutes(slot_minutes)
        if not 0 <= int(weekday) <= 6:
            raise ValidationException(f"weekday must be in 0..6, got {weekday}", "INVALID_WEEKDAY")
        if not 0 <= int(slot_index) < 1440 // slot_minutes:
            raise ValidationException(
                f"slot_index {slot_index} outside [0, {1440 // slot_minutes})", "INVALID_SLOT_INDEX")
        self.weekday = int(weekday)
        self.slot_index = int(slot_index)
        self.slot_minutes = slot_minutes

    @property
    def slots_per_day(self) -> int:
        return 1440 // self.slot_minutes

    @property
    def start_minute(self) -> int:
        return self.slot_index * self.slot_minutes

    def _key(self):
        return (self.weekday, self.slot_index, self.slot_minutes)

    def __eq__(self, other):
        if not isinstance(other, SlotKey):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __lt__(self, other: "SlotKey"):
        return self._key() < other._key()

    def __repr__(self):
        return f"SlotKey(weekday={self.weekday}, slot_index={self.slot_index}, slot_minutes={self.slot_minutes})"


class SlotBucket:
    def __init__(self, key: SlotKey, day: date, lats, lons, ts=None, ids: Optional[List[Optional[str]]] = None):
        """Posts of one calendar date and time slot, held as coordinate arrays."""
        self.key = key
        self.date = day
        self.lats = np.asarray(lats, dtype=float)
        self.lons = np.asarray(lons, dtype=float)
        if self.lats.shape != self.lons.shape:
            raise ValidationException("Bucket latitude/longitude arrays differ in length", "BUCKET_SHAPE_MISMATCH")
        self.ts = None if ts is None else np.asarray(ts, dtype=np.int64)
        self.ids = ids

    def __len__(self):
        return int(self.lats.size)

    def __repr__(self):
        return f"<SlotBucket {self.date.isoformat()} {self.key!r} n={len(self)}>"

    @property
    def points(self) -> List[GeoPoint]:
        return [GeoPoint(lat, lon) for lat, lon in zip(self.lats.tolist(), self.lons.tolist())]

    @property
    def posts(self) -> List[PostRecord]:
        ts = self.ts.tolist() if self.ts is not None else [0] * len(self)
        ids = self.ids if self.ids is not None else [None] * len(self)
        return [PostRecord(t, GeoPoint(lat, lon), i)
                for t, lat, lon, i in zip(ts, self.lats.tolist(), self.lons.tolist(), ids)]


class IngestStats:
    def __init__(self):
        """Counters for parsing and bucketing."""
        self.parsed = 0
        self.malformed = 0
        self.outside_region = 0
        self.outside_period = 0
        self.retained = 0

    @property
    def total_rows(self) -> int:
        return self.parsed + self.malformed

    @property
    def dropped(self) -> int:
        return self.outside_region + self.outside_period

    def to_dict(self) -> Dict[str, int]:
        return {
            "parsed": self.parsed,
            "malformed": self.malformed,
            "outside_region": self.outside_region,
            "outside_period": self.outside_period,
            "retained": self.retained,
        }

    def __repr__(self):
        return f"<IngestStats {self.to_dict()}>"
