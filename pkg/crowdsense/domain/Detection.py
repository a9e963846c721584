import math
from datetime import date
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from ..exceptions import FormatError, IoError, ValidationException

SCORE_METHODS = ("endpoints", "consecutive")
DEFAULT_WARMUP_DAYS = 28


class DayScore:
    def __init__(self, day: date, score: float, method: str = "endpoints", streams: Sequence[str] = ()):
        """Anomaly score of one date in bits, with the stream ids that produced the maximum."""
        if method not in SCORE_METHODS:
            raise ValidationException(f"Unknown scoring method '{method}'", "INVALID_SCORE_METHOD")
        if not math.isfinite(score) or score < 0:
            raise ValidationException(f"Day score must be finite and >= 0, got {score}", "INVALID_SCORE")
        self.date = day
        self.score = float(score)
        self.method = method
        self.streams = list(streams)

    def __repr__(self):
        return f"<DayScore {self.date.isoformat()} {self.score:.4f} ({self.method})>"

    def to_dict(self) -> Dict[str, Any]:
        return {"date": self.date.isoformat(), "score": self.score, "method": self.method, "streams": self.streams}


class SpecialDaySet:
    def __init__(self, labels: Optional[Dict[date, str]] = None):
        """Labeled abnormal dates; one label per date."""
        self.labels: Dict[date, str] = dict(labels or {})

    @staticmethod
    def from_events(events: Iterable[Tuple[date, str]]) -> "SpecialDaySet":
        labels: Dict[date, str] = {}
        for day, label in events:
            labels[day] = f"{labels[day]}; {label}" if day in labels else label
        return SpecialDaySet(labels)

    @property
    def dates(self) -> List[date]:
        return sorted(self.labels)

    def __contains__(self, day: date) -> bool:
        return day in self.labels

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.dates)

    def __eq__(self, other):
        if not isinstance(other, SpecialDaySet):
            return NotImplemented
        return self.labels == other.labels

    def restricted_to(self, days: Iterable[date]) -> "SpecialDaySet":
        keep = set(days)
        return SpecialDaySet({d: l for d, l in self.labels.items() if d in keep})

    def to_csv(self, path: str) -> None:
        frame = pd.DataFrame([(d.isoformat(), self.labels[d]) for d in self.dates], columns=["date", "label"])
        try:
            frame.to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            raise IoError(f"Failed to write special days to '{path}': {str(e)}", "WRITE_FAILED")

    @staticmethod
    def from_csv(path: str) -> "SpecialDaySet":
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except FileNotFoundError:
            raise IoError(f"Special-day file '{path}' not found", "FILE_NOT_FOUND")
        except pd.errors.EmptyDataError:
            return SpecialDaySet()
        if "date" not in frame.columns:
            raise FormatError(f"Special-day file '{path}' has no 'date' column", "BAD_SPECIALS_FILE")
        labels = frame["label"].tolist() if "label" in frame.columns else [""] * len(frame)
        events = []
        for raw, label in zip(frame["date"].tolist(), labels):
            try:
                events.append((date.fromisoformat(raw.strip()), label))
            except ValueError:
                raise FormatError(f"Special-day file '{path}' has a bad date '{raw}'", "BAD_SPECIALS_FILE")
        return SpecialDaySet.from_events(events)

    def __repr__(self):
        return f"<SpecialDaySet n={len(self)}>"


class AnomalyRanking:
    def __init__(self, scores: Sequence[DayScore]):
        """Days ordered by descending score, earlier date first on ties."""
        self.scores = sorted(scores, key=lambda s: (-s.score, s.date))

    @property
    def dates(self) -> List[date]:
        return [s.date for s in self.scores]

    def __len__(self):
        return len(self.scores)

    def __getitem__(self, i):
        return self.scores[i]

    def rank_of(self, day: date) -> Optional[int]:
        """1-based position, or None if the date was not scored."""
        for i, s in enumerate(self.scores, start=1):
            if s.date == day:
                return i
        return None

    def to_records(self, specials: Optional[SpecialDaySet] = None) -> List[Dict[str, Any]]:
        return [{"date": s.date.isoformat(), "score": s.score, "rank": i,
                 "is_special": bool(specials is not None and s.date in specials), "streams": s.streams}
                for i, s in enumerate(self.scores, start=1)]


class EvalCurves:
    def __init__(self, total: int, n_specials: int, hits: Sequence[int]):
        """hits[m-1] = specials among the top m days, for m = 1..total."""
        if n_specials <= 0:
            raise ValidationException("Evaluation needs at least one special day", "NO_SPECIALS")
        if len(hits) != total:
            raise ValidationException("One hit count per prefix length is required", "INVALID_CURVES")
        self.total = total
        self.n_specials = n_specials
        self.hits = list(hits)

    @property
    def fraction_processed(self) -> List[float]:
        return [m / self.total for m in range(1, self.total + 1)]

    @property
    def detection_rate(self) -> List[float]:
        return [h / self.n_specials for h in self.hits]

    @property
    def false_positive_rate(self) -> List[float]:
        return [(m - h) / m for m, h in enumerate(self.hits, start=1)]

    def at_fraction(self, fraction: float) -> Tuple[int, float, float]:
        """(m, detection, fpr) at the cut m = ceil(fraction * total), at least 1."""
        m = min(self.total, max(1, math.ceil(fraction * self.total - 1e-9)))
        h = self.hits[m - 1]
        return m, h / self.n_specials, (m - h) / m

    def auc(self) -> float:
        """Area under the detection curve as a step function over fraction processed."""
        return math.fsum(self.detection_rate) / self.total

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "m": list(range(1, self.total + 1)),
            "fraction_processed": self.fraction_processed,
            "detection_rate": self.detection_rate,
            "false_positive_rate": self.false_positive_rate,
        })

    def __repr__(self):
        return f"<EvalCurves days={self.total} specials={self.n_specials}>"


class SlotScore:
    def __init__(self, day: date, slot_index: int, stream: str, delta: float):
        """|H(i) - H(i-1)| at one slot of one stream."""
        self.date = day
        self.slot_index = slot_index
        self.stream = stream
        self.delta = float(delta)

    def to_dict(self) -> Dict[str, Any]:
        return {"date": self.date.isoformat(), "slot_index": self.slot_index, "stream": self.stream,
                "delta_bits": self.delta}

    def __repr__(self):
        return f"<SlotScore {self.date.isoformat()} #{self.slot_index} {self.stream} {self.delta:.4f}>"


# Special events of New York City, 2015-08-23 .. 2016-02-28
NYC_2015_EVENTS = [
    (date(2015, 9, 7), "Labor Day"),
    (date(2015, 10, 12), "Columbus Day"),
    (date(2015, 10, 31), "Halloween"),
    (date(2015, 11, 11), "Veterans Day"),
    (date(2015, 11, 26), "Thanksgiving"),
    (date(2015, 12, 24), "Christmas Eve"),
    (date(2015, 12, 25), "Christmas"),
    (date(2015, 12, 31), "New Year's Eve"),
    (date(2016, 1, 1), "New Year"),
    (date(2016, 1, 21), "Jonas Storm"),
    (date(2016, 1, 22), "Jonas Storm"),
    (date(2016, 1, 23), "Jonas Storm"),
    (date(2016, 1, 24), "Jonas Storm"),
]

BUILTIN_SPECIALS = {"nyc-2015": NYC_2015_EVENTS}


def builtin_specials(name: str) -> SpecialDaySet:
    if name not in BUILTIN_SPECIALS:
        raise ValidationException(f"Unknown special-day set '{name}'", "UNKNOWN_SPECIALS")
    return SpecialDaySet.from_events(BUILTIN_SPECIALS[name])
