"""Map representative locations to grid-cell symbols and assemble per-weekday sequences."""

import logging
import math
from collections import defaultdict
from datetime import date, timedelta
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..domain.Clustering import RepresentativeSet
from ..domain.GeoPoint import GeoPoint
from ..domain.Post import SlotKey, validate_slot_minutes
from ..domain.Symbols import MISSING, GridSpec, SymbolizeStats, SymbolSequence
from ..exceptions import FormatError, IoError, ValidationException
from . import geo_service

logger = logging.getLogger(__name__)

SEQUENCE_COLUMNS = ["date", "weekday", "slot_index", "rep_index", "symbol"]


def cells_for(lats, lons, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized `to_cell`: (symbols, clamped mask). Row 0 is north, col 0 is west."""
    east, north = geo_service.to_local_xy(lats, lons, grid.region.center)
    half = grid.region.side_m / 2.0
    cell = grid.cell_m
    col = np.floor((east + half) / cell).astype(np.int64)
    row = np.floor((half - north) / cell).astype(np.int64)
    clamped = (np.abs(east) > half) | (np.abs(north) > half)
    col = np.clip(col, 0, grid.L - 1)
    row = np.clip(row, 0, grid.L - 1)
    return row * grid.L + col, clamped


def to_cell(p: GeoPoint, grid: GridSpec, stats: Optional[SymbolizeStats] = None) -> int:
    """Row-major symbol of the cell enclosing p; points outside the square clamp to the nearest edge cell."""
    symbols, clamped = cells_for(np.array([p.lat]), np.array([p.lon]), grid)
    if stats is not None:
        stats.symbols += 1
        stats.clamped += int(clamped[0])
    if clamped[0]:
        logger.debug(f"{p!r} lies outside the {grid.region.side_m} m grid; clamped")
    return int(symbols[0])


def joint_symbol(cells: List[int], grid: GridSpec) -> int:
    """Encode a tuple of cells as one integer in base L^2; MISSING if any cell is missing."""
    if any(c == MISSING for c in cells):
        return MISSING
    code = 0
    for r, c in enumerate(cells):
        code += c * grid.n_cells ** r
    return code


def joint_alphabet_size(grid: GridSpec, k: int) -> int:
    return grid.n_cells ** k + 1


def build_sequences(reps: Dict[Tuple[date, SlotKey], RepresentativeSet], grid: GridSpec,
                    period: Optional[Tuple[date, date]] = None, slot_minutes: Optional[int] = None,
                    k: Optional[int] = None, joint: bool = False,
                    stats: Optional[SymbolizeStats] = None) -> List[SymbolSequence]:
    """k sequences per weekday (one when joint); slots without representatives become MISSING.

    Every sequence has exactly (dates with that weekday) x slots_per_day entries.
    """
    stats = stats if stats is not None else SymbolizeStats()
    keys = sorted(reps)
    if slot_minutes is None:
        if not keys:
            raise ValidationException("slot_minutes is required when there are no representatives", "MISSING_SLOT_MINUTES")
        slot_minutes = keys[0][1].slot_minutes
    slot_minutes = validate_slot_minutes(slot_minutes)
    if period is None:
        if not keys:
            return []
        period = (keys[0][0], keys[-1][0])
    if k is None:
        k = max((r.k for r in reps.values()), default=1)
    slots_per_day = 1440 // slot_minutes

    # symbolize every representative once
    cell_of: Dict[Tuple[date, int], List[int]] = {}
    if reps:
        flat = [(day, key.slot_index, r, p) for (day, key), rs in reps.items() for r, p in enumerate(rs.reps)]
        symbols, clamped = cells_for(np.array([f[3].lat for f in flat]), np.array([f[3].lon for f in flat]), grid)
        stats.clamped += int(clamped.sum())
        for (day, slot, r, _), sym in zip(flat, symbols.tolist()):
            cell_of.setdefault((day, slot), [MISSING] * k)
            if r < k:
                cell_of[(day, slot)][r] = sym
    if stats.clamped:
        logger.info(f"{stats.clamped} representatives fell outside the grid and were clamped")

    start, end = period
    by_weekday: Dict[int, List[date]] = defaultdict(list)
    for i in range((end - start).days + 1):
        day = start + timedelta(days=i)
        by_weekday[day.weekday()].append(day)

    sequences: List[SymbolSequence] = []
    for weekday in sorted(by_weekday):
        streams = 1 if joint else k
        entries = [[] for _ in range(streams)]
        for day in by_weekday[weekday]:
            for slot in range(slots_per_day):
                cells = cell_of.get((day, slot), [MISSING] * k)
                if joint:
                    entries[0].append((day, slot, joint_symbol(cells, grid)))
                else:
                    for r in range(k):
                        entries[r].append((day, slot, cells[r]))
        for r, e in enumerate(entries):
            stats.symbols += len(e)
            stats.missing += sum(1 for x in e if x[2] == MISSING)
            sequences.append(SymbolSequence(weekday, r, e))
    return sequences


def write_sequences(sequences: List[SymbolSequence], path: str) -> None:
    rows = [(day.isoformat(), seq.weekday, slot, seq.rep_index, sym)
            for seq in sequences for day, slot, sym in seq.entries]
    frame = pd.DataFrame(rows, columns=SEQUENCE_COLUMNS)
    frame = frame.sort_values(["date", "slot_index", "rep_index"], kind="mergesort")
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write sequences to '{path}': {str(e)}", "WRITE_FAILED")


def read_sequences(path: str) -> List[SymbolSequence]:
    try:
        frame = pd.read_csv(path, dtype={"date": str})
    except FileNotFoundError:
        raise IoError(f"Sequence file '{path}' not found", "FILE_NOT_FOUND")
    except ValueError as e:
        raise FormatError(f"Sequence file '{path}' is malformed: {str(e)}", "BAD_SEQUENCE_FILE")
    missing = set(SEQUENCE_COLUMNS) - set(frame.columns)
    if missing:
        raise FormatError(f"Sequence file '{path}' lacks columns {sorted(missing)}", "BAD_SEQUENCE_FILE")
    frame["day"] = [date.fromisoformat(d) for d in frame["date"]]
    sequences = []
    for (weekday, rep_index), grp in frame.groupby(["weekday", "rep_index"], sort=True):
        grp = grp.sort_values(["day", "slot_index"], kind="mergesort")
        entries = list(zip(grp["day"].tolist(), grp["slot_index"].astype(int).tolist(),
                           grp["symbol"].astype(int).tolist()))
        sequences.append(SymbolSequence(int(weekday), int(rep_index), entries))
    return sequences


def slots_per_day_of(sequence: SymbolSequence) -> int:
    """Entries per date in a sequence."""
    days = sequence.dates
    return len(sequence) // len(days) if days else 0


def log2_alphabet(grid: GridSpec, k: int = 1, joint: bool = False) -> float:
    return math.log2(joint_alphabet_size(grid, k) if joint else grid.alphabet_size)
