import math
from collections import Counter
from datetime import date
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from ..exceptions import EmptyInputException, ValidationException

ESTIMATORS = ("shannon", "hartley", "grassberger")


def clogc(c: int) -> float:
    """c * log2(c), with 0 * log2(0) = 0."""
    return c * math.log2(c) if c > 0 else 0.0


def shannon_from_sums(total: int, clogc_sum: float, distinct: int) -> float:
    """-sum p log2 p written as log2(N) - sum(N(s) log2 N(s)) / N."""
    if total <= 0:
        raise EmptyInputException("Entropy of an empty sample is undefined", "EMPTY_INPUT")
    if distinct <= 1:
        return 0.0
    return max(0.0, math.log2(total) - clogc_sum / total)


class CountTable:
    def __init__(self, counts: Optional[Dict[Hashable, int]] = None):
        """Occurrence counts N(s) and their total N."""
        self.counts: Dict[Hashable, int] = {}
        for symbol, c in (counts or {}).items():
            if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                raise ValidationException(f"Count of {symbol!r} must be a non-negative integer", "INVALID_COUNT")
            if c > 0:
                self.counts[symbol] = c
        self.total = sum(self.counts.values())

    @staticmethod
    def from_sequence(seq: Iterable[Hashable]) -> "CountTable":
        return CountTable(dict(Counter(seq)))

    def __len__(self):
        return len(self.counts)

    def probability(self, symbol: Hashable) -> float:
        """Maximum-likelihood estimate N(s) / N."""
        if self.total == 0:
            raise EmptyInputException("No observations", "EMPTY_INPUT")
        return self.counts.get(symbol, 0) / self.total

    def clogc_sum(self) -> float:
        return math.fsum(clogc(c) for c in self.counts.values())

    def shannon(self) -> float:
        return shannon_from_sums(self.total, self.clogc_sum(), len(self.counts))

    def __repr__(self):
        return f"<CountTable distinct={len(self.counts)} total={self.total}>"


class EntropyConfig:
    def __init__(self, estimator: str = "shannon", window_weeks: Optional[int] = 4, slot_minutes: int = 15, L: int = 7):
        """Estimator choice plus window length in weeks (None = cumulative)."""
        if estimator not in ESTIMATORS:
            raise ValidationException(f"Unknown estimator '{estimator}', expected one of {ESTIMATORS}", "INVALID_ESTIMATOR")
        if window_weeks is not None and (isinstance(window_weeks, bool) or not isinstance(window_weeks, int) or window_weeks < 1):
            raise ValidationException(f"window_weeks must be an integer >= 1 or None, got {window_weeks!r}", "INVALID_WINDOW")
        if slot_minutes <= 0 or 1440 % slot_minutes != 0:
            raise ValidationException(f"slot_minutes must divide 1440, got {slot_minutes}", "INVALID_SLOT_MINUTES")
        self.estimator = estimator
        self.window_weeks = window_weeks
        self.slot_minutes = slot_minutes
        self.L = L

    @property
    def slots_per_day(self) -> int:
        return 1440 // self.slot_minutes

    @property
    def window_symbols(self) -> Optional[int]:
        return None if self.window_weeks is None else self.window_weeks * self.slots_per_day

    def to_dict(self) -> Dict[str, Any]:
        return {"estimator": self.estimator, "window_weeks": self.window_weeks,
                "slot_minutes": self.slot_minutes, "L": self.L}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "EntropyConfig":
        return EntropyConfig(d.get("estimator", "shannon"), d.get("window_weeks", 4),
                             d.get("slot_minutes", 15), d.get("L", 7))

    def __repr__(self):
        return f"<EntropyConfig {self.to_dict()}>"


class EntropyTrace:
    def __init__(self, weekday: Optional[int], rep_index: int, values: Sequence[Tuple[Optional[date], int, float]],
                 config: Optional[EntropyConfig] = None):
        """Entropy in bits per (date, slot) of one weekday/representative stream."""
        for _, _, h in values:
            if h < 0 or not math.isfinite(h):
                raise ValidationException(f"Entropy values must be finite and >= 0, got {h}", "INVALID_ENTROPY")
        self.weekday = weekday
        self.rep_index = rep_index
        self.values = list(values)
        self.config = config

    @property
    def bits(self) -> List[float]:
        return [v[2] for v in self.values]

    @property
    def stream_id(self) -> str:
        return f"{self.weekday}:{self.rep_index}"

    def by_date(self) -> Dict[date, List[Tuple[int, float]]]:
        """Values grouped per date, each group ordered by slot."""
        out: Dict[date, List[Tuple[int, float]]] = {}
        for day, slot, h in self.values:
            out.setdefault(day, []).append((slot, h))
        for group in out.values():
            group.sort()
        return out

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"<EntropyTrace stream={self.stream_id} n={len(self)}>"
