from datetime import date
from typing import Any, Dict, List, Sequence, Tuple

from .GeoPoint import Region
from ..exceptions import ValidationException

# Symbol of a slot without representatives
MISSING = -1


class GridSpec:
    def __init__(self, region: Region, L: int = 7):
        """L x L equal squares tiling the side_m x side_m square around the region center."""
        if isinstance(L, bool) or not isinstance(L, int) or L < 2:
            raise ValidationException(f"Grid needs L >= 2 cells per side, got {L!r}", "INVALID_GRID")
        self.region = region
        self.L = L

    @property
    def cell_m(self) -> float:
        return self.region.side_m / self.L

    @property
    def n_cells(self) -> int:
        return self.L * self.L

    @property
    def alphabet_size(self) -> int:
        """Cells plus the MISSING symbol."""
        return self.n_cells + 1

    def row_col(self, symbol: int) -> Tuple[int, int]:
        if symbol == MISSING:
            raise ValidationException("MISSING has no grid position", "MISSING_SYMBOL")
        return divmod(symbol, self.L)

    def __repr__(self):
        return f"<GridSpec {self.L}x{self.L} cell={self.cell_m:.1f}m>"

    def to_dict(self) -> Dict[str, Any]:
        return {"region": self.region.to_dict(), "L": self.L}


class SymbolizeStats:
    def __init__(self):
        self.symbols = 0
        self.clamped = 0
        self.missing = 0

    def to_dict(self) -> Dict[str, int]:
        return {"symbols": self.symbols, "clamped": self.clamped, "missing": self.missing}


class SymbolSequence:
    def __init__(self, weekday: int, rep_index: int, entries: Sequence[Tuple[date, int, int]]):
        """Grid-cell symbols of one representative on one weekday, ordered by (date, slot)."""
        entries = list(entries)
        for prev, cur in zip(entries, entries[1:]):
            if (prev[0], prev[1]) >= (cur[0], cur[1]):
                raise ValidationException("Sequence entries must be strictly ordered by (date, slot)", "UNORDERED_SEQUENCE")
        for day, _, _ in entries:
            if day.weekday() != weekday:
                raise ValidationException(f"{day} is not weekday {weekday}", "WEEKDAY_MISMATCH")
        self.weekday = weekday
        self.rep_index = rep_index
        self.entries = entries

    @property
    def symbols(self) -> List[int]:
        return [e[2] for e in self.entries]

    @property
    def dates(self) -> List[date]:
        return sorted({e[0] for e in self.entries})

    @property
    def stream_id(self) -> str:
        return f"{self.weekday}:{self.rep_index}"

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"<SymbolSequence weekday={self.weekday} rep={self.rep_index} n={len(self)}>"
