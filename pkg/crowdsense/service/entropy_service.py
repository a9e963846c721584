"""Shannon, Hartley and Grassberger estimators in batch, cumulative and windowed form."""

import logging
import math
from collections import deque
from datetime import date
from typing import Dict, Hashable, List, Optional, Sequence, Union

import pandas as pd

from ..domain.Entropy import CountTable, EntropyConfig, EntropyTrace, clogc, shannon_from_sums
from ..domain.Symbols import SymbolSequence
from ..exceptions import EmptyInputException, FormatError, IoError, TooShortException, ValidationException
from .symbolize_service import slots_per_day_of

logger = logging.getLogger(__name__)

CHECKPOINT_EVERY = 10_000
TRACE_COLUMNS = ["date", "weekday", "slot_index", "rep_index", "H_bits"]
BITS_FORMAT = "%.12f"

SymbolsLike = Union[Sequence[Hashable], SymbolSequence, CountTable]


def _symbols(seq) -> List[Hashable]:
    if isinstance(seq, SymbolSequence):
        return seq.symbols
    if isinstance(seq, str):
        return list(seq)
    return list(seq)


# ---------- batch estimators ----------

def shannon(seq: SymbolsLike) -> float:
    """Plug-in Shannon entropy in bits."""
    table = seq if isinstance(seq, CountTable) else CountTable.from_sequence(_symbols(seq))
    if table.total == 0:
        raise EmptyInputException("Shannon entropy of an empty sequence", "EMPTY_INPUT")
    return table.shannon()


def hartley(seq: SymbolsLike) -> float:
    """log2 of the number of distinct observed symbols."""
    table = seq if isinstance(seq, CountTable) else CountTable.from_sequence(_symbols(seq))
    if table.total == 0:
        raise EmptyInputException("Hartley entropy of an empty sequence", "EMPTY_INPUT")
    return math.log2(len(table))


def _encode(symbols: Sequence[Hashable]) -> str:
    """One code point per distinct symbol, so substring search runs on a str."""
    codes: Dict[Hashable, str] = {}
    out = []
    for s in symbols:
        ch = codes.get(s)
        if ch is None:
            ch = codes[s] = chr(0x10000 + len(codes))
        out.append(ch)
    return "".join(out)


def match_lengths(seq: Sequence[Hashable]) -> List[int]:
    """Lambda_i for i = 2..N (1-based): shortest substring starting at i absent from s[1..i-1].

    When every substring up to the end of the sequence was already seen,
    Lambda_i = (N - i + 1) + 1. Lambda_i >= Lambda_{i-1} - 1, so the search
    starts there.
    """
    symbols = _symbols(seq)
    n = len(symbols)
    text = _encode(symbols)
    lambdas = []
    prev = 1
    for p in range(1, n):
        length = max(1, prev - 1)
        while p + length <= n and text.find(text[p:p + length], 0, p) != -1:
            length += 1
        lam = length if p + length <= n else n - p + 1
        lambdas.append(lam)
        prev = lam
    return lambdas


def grassberger(seq: SymbolsLike) -> float:
    """Entropy-rate estimate (1/N sum_{i>=2} Lambda_i / log2 i)^-1 in bits."""
    symbols = _symbols(seq)
    n = len(symbols)
    if n < 2:
        raise TooShortException(f"Grassberger estimator needs at least 2 symbols, got {n}", "SEQUENCE_TOO_SHORT")
    lambdas = match_lengths(symbols)
    total = math.fsum(lam / math.log2(i) for i, lam in enumerate(lambdas, start=2))
    return n / total


def estimate(seq: SymbolsLike, estimator: str = "shannon") -> float:
    if estimator == "shannon":
        return shannon(seq)
    if estimator == "hartley":
        return hartley(seq)
    if estimator == "grassberger":
        return grassberger(seq)
    raise ValidationException(f"Unknown estimator '{estimator}'", "INVALID_ESTIMATOR")


# ---------- incremental ----------

class SlidingShannon:
    """Shannon/Hartley entropy over the most recent `window` symbols (all symbols when None).

    Keeps integer counts and the running sum of N(s) log2 N(s); a push changes
    at most two terms of that sum. The sum is rebuilt from the counts every
    `checkpoint_every` updates to bound float drift.
    """

    def __init__(self, window: Optional[int] = None, checkpoint_every: int = CHECKPOINT_EVERY):
        if window is not None and window < 1:
            raise ValidationException(f"Window must hold at least one symbol, got {window}", "INVALID_WINDOW")
        self.window = window
        self.checkpoint_every = checkpoint_every
        self.counts: Dict[Hashable, int] = {}
        self.buffer: deque = deque()
        self.total = 0
        self._sum = 0.0
        self._updates = 0

    def _add(self, symbol: Hashable) -> None:
        c = self.counts.get(symbol, 0)
        self._sum += clogc(c + 1) - clogc(c)
        self.counts[symbol] = c + 1
        self.total += 1

    def _remove(self, symbol: Hashable) -> None:
        c = self.counts[symbol]
        self._sum += clogc(c - 1) - clogc(c)
        if c == 1:
            del self.counts[symbol]
        else:
            self.counts[symbol] = c - 1
        self.total -= 1

    def push(self, symbol: Hashable) -> float:
        self._add(symbol)
        if self.window is not None:
            self.buffer.append(symbol)
            if self.total > self.window:
                self._remove(self.buffer.popleft())
        self._updates += 1
        if self._updates % self.checkpoint_every == 0:
            self.recompute()
        return self.shannon

    def recompute(self) -> None:
        self._sum = math.fsum(clogc(c) for c in self.counts.values())

    @property
    def shannon(self) -> float:
        return shannon_from_sums(self.total, self._sum, len(self.counts))

    @property
    def hartley(self) -> float:
        return math.log2(len(self.counts)) if self.counts else 0.0

    def __len__(self):
        return self.total


def _stream_meta(seq):
    if isinstance(seq, SymbolSequence):
        return seq.weekday, seq.rep_index, [(d, s) for d, s, _ in seq.entries]
    symbols = _symbols(seq)
    return None, 0, [(None, i) for i in range(len(symbols))]


def _clamp(h: float, alphabet_size: Optional[int]) -> float:
    h = max(0.0, h)
    if alphabet_size is not None and alphabet_size >= 1:
        h = min(h, math.log2(alphabet_size))
    return h


def _sliding_values(symbols: List[Hashable], window: Optional[int], estimator: str) -> List[float]:
    acc = SlidingShannon(window)
    values = []
    last = len(symbols) - 1
    for i, s in enumerate(symbols):
        acc.push(s)
        if i == last:
            acc.recompute()
        values.append(acc.shannon if estimator == "shannon" else acc.hartley)
    return values


def _day_endpoint_indices(meta) -> List[int]:
    idx = []
    for i, (day, _) in enumerate(meta):
        first = i == 0 or meta[i - 1][0] != day
        last = i == len(meta) - 1 or meta[i + 1][0] != day
        if first or last:
            idx.append(i)
    return idx


def _grassberger_values(symbols: List[Hashable], window: Optional[int], meta,
                        alphabet_size: Optional[int]) -> List[tuple]:
    """Grassberger is batch-only; it is evaluated at the first and last slot of each day."""
    out = []
    for i in _day_endpoint_indices(meta):
        lo = 0 if window is None else max(0, i + 1 - window)
        chunk = symbols[lo:i + 1]
        h = grassberger(chunk) if len(chunk) >= 2 else 0.0
        out.append((i, _clamp(h, alphabet_size)))
    return out


def _build_trace(seq, window: Optional[int], estimator: str, config: Optional[EntropyConfig],
                 alphabet_size: Optional[int]) -> EntropyTrace:
    weekday, rep_index, meta = _stream_meta(seq)
    symbols = _symbols(seq)
    if not symbols:
        raise EmptyInputException("Cannot trace an empty sequence", "EMPTY_INPUT")
    if estimator == "grassberger":
        values = [(meta[i][0], meta[i][1], h) for i, h in _grassberger_values(symbols, window, meta, alphabet_size)]
    else:
        bits = _sliding_values(symbols, window, estimator)
        values = [(d, s, _clamp(h, alphabet_size)) for (d, s), h in zip(meta, bits)]
    return EntropyTrace(weekday, rep_index, values, config)


def trace_cumulative(seq, estimator: str = "shannon", alphabet_size: Optional[int] = None,
                     config: Optional[EntropyConfig] = None) -> EntropyTrace:
    """H(i) over every prefix; the last value equals the batch estimate of the whole sequence."""
    return _build_trace(seq, None, estimator, config, alphabet_size)


def trace_windowed(seq, window_weeks: Optional[int], slots_per_day: Optional[int] = None,
                   estimator: str = "shannon", alphabet_size: Optional[int] = None,
                   config: Optional[EntropyConfig] = None) -> EntropyTrace:
    """H over the last min(available, W * slots_per_day) symbols at every slot."""
    if window_weeks is None:
        return trace_cumulative(seq, estimator, alphabet_size, config)
    if slots_per_day is None:
        if not isinstance(seq, SymbolSequence):
            raise ValidationException("slots_per_day is required for a plain symbol list", "MISSING_SLOTS_PER_DAY")
        slots_per_day = slots_per_day_of(seq)
    if window_weeks < 1 or slots_per_day < 1:
        raise ValidationException("Window and slots_per_day must be positive", "INVALID_WINDOW")
    if len(_symbols(seq)) < slots_per_day:
        raise TooShortException("A windowed trace needs at least one full day of symbols", "SEQUENCE_TOO_SHORT")
    return _build_trace(seq, window_weeks * slots_per_day, estimator, config, alphabet_size)


def compute_traces(sequences: List[SymbolSequence], config: EntropyConfig,
                   alphabet_size: Optional[int] = None) -> List[EntropyTrace]:
    """One trace per (weekday, representative) stream."""
    traces = []
    for seq in sequences:
        traces.append(trace_windowed(seq, config.window_weeks, config.slots_per_day, config.estimator,
                                     alphabet_size, config))
    logger.info(f"Computed {len(traces)} {config.estimator} traces (window={config.window_weeks} weeks)")
    return traces


def write_traces(traces: List[EntropyTrace], path: str) -> None:
    rows = [(day.isoformat(), tr.weekday, slot, tr.rep_index, h)
            for tr in traces for day, slot, h in tr.values]
    frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    frame = frame.sort_values(["date", "slot_index", "rep_index"], kind="mergesort")
    try:
        frame.to_csv(path, index=False, float_format=BITS_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write traces to '{path}': {str(e)}", "WRITE_FAILED")


def read_traces(path: str, config: Optional[EntropyConfig] = None) -> List[EntropyTrace]:
    try:
        frame = pd.read_csv(path, dtype={"date": str})
    except FileNotFoundError:
        raise IoError(f"Trace file '{path}' not found", "FILE_NOT_FOUND")
    except ValueError as e:
        raise FormatError(f"Trace file '{path}' is malformed: {str(e)}", "BAD_TRACE_FILE")
    missing = set(TRACE_COLUMNS) - set(frame.columns)
    if missing:
        raise FormatError(f"Trace file '{path}' lacks columns {sorted(missing)}", "BAD_TRACE_FILE")
    frame["day"] = [date.fromisoformat(d) for d in frame["date"]]
    traces = []
    for (weekday, rep_index), grp in frame.groupby(["weekday", "rep_index"], sort=True):
        grp = grp.sort_values(["day", "slot_index"], kind="mergesort")
        values = list(zip(grp["day"].tolist(), grp["slot_index"].astype(int).tolist(),
                          grp["H_bits"].astype(float).tolist()))
        traces.append(EntropyTrace(int(weekday), int(rep_index), values, config))
    return traces
