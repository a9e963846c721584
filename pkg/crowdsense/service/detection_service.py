"""Day anomaly scores from entropy traces, ranking, and detection / false-positive curves."""

import json
import logging
from datetime import date, timedelta
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..domain.Detection import (
    DEFAULT_WARMUP_DAYS,
    SCORE_METHODS,
    AnomalyRanking,
    DayScore,
    EvalCurves,
    SlotScore,
    SpecialDaySet,
)
from ..domain.Entropy import EntropyTrace
from ..exceptions import (
    EmptyInputException,
    FormatError,
    IoError,
    LabelMismatchException,
    TooShortException,
    ValidationException,
)

logger = logging.getLogger(__name__)

HEADLINE_FRACTION = 0.2
CURVE_FORMAT = "%.12f"
SLOT_FLAG_COLUMNS = ["date", "slot_index", "stream", "delta_bits"]


def _stream_day_scores(trace: EntropyTrace, method: str) -> Dict[date, float]:
    per_day = trace.by_date()
    days = sorted(per_day)
    out: Dict[date, float] = {}
    if method == "endpoints":
        for day in days:
            values = per_day[day]
            out[day] = abs(values[-1][1] - values[0][1])
    else:
        for prev, day in zip(days, days[1:]):
            out[day] = abs(per_day[day][-1][1] - per_day[prev][-1][1])
    return out


def score_days(traces: Sequence[EntropyTrace], method: str = "endpoints",
               warmup_days: int = DEFAULT_WARMUP_DAYS) -> List[DayScore]:
    """One score per date: max over the representative streams of the per-stream score.

    endpoints: |H(last slot of d) - H(first slot of d)|.
    consecutive: |H(end of d) - H(end of the previous same-weekday day)|; a stream's first day has no score.
    Dates earlier than first_date + warmup_days are not scored.
    """
    if method not in SCORE_METHODS:
        raise ValidationException(f"Unknown scoring method '{method}', expected one of {SCORE_METHODS}",
                                  "INVALID_SCORE_METHOD")
    if warmup_days < 0:
        raise ValidationException(f"warmup_days must be >= 0, got {warmup_days}", "INVALID_WARMUP")
    all_days = {v[0] for tr in traces for v in tr.values}
    if not all_days:
        raise EmptyInputException("No entropy traces to score", "EMPTY_INPUT")
    first, last = min(all_days), max(all_days)
    span = (last - first).days + 1
    if span < warmup_days + 1:
        raise TooShortException(
            f"Traces cover {span} days; scoring needs more than the {warmup_days}-day warm-up", "TRACE_TOO_SHORT")
    cutoff = first + timedelta(days=warmup_days)

    best: Dict[date, float] = {}
    streams: Dict[date, List[str]] = {}
    for tr in traces:
        for day, score in _stream_day_scores(tr, method).items():
            if day < cutoff:
                continue
            if day not in best or score > best[day]:
                best[day] = score
                streams[day] = [tr.stream_id]
            elif score == best[day]:
                streams[day].append(tr.stream_id)
    scores = [DayScore(day, best[day], method, sorted(streams[day])) for day in sorted(best)]
    logger.info(f"Scored {len(scores)} days with the {method} method (warm-up {warmup_days} days)")
    return scores


def rank(scores: Sequence[DayScore]) -> AnomalyRanking:
    if not scores:
        raise EmptyInputException("Cannot rank an empty score list", "EMPTY_INPUT")
    return AnomalyRanking(scores)


def evaluate(ranking: AnomalyRanking, specials: SpecialDaySet, drop_unscored: bool = False) -> EvalCurves:
    """Detection rate |top-m & specials| / |specials| and false-positive rate |top-m - specials| / m for every m."""
    if len(specials) == 0:
        raise ValidationException("Evaluation needs at least one special day", "NO_SPECIALS")
    scored = set(ranking.dates)
    offenders = [d for d in specials.dates if d not in scored]
    if offenders:
        listed = ", ".join(d.isoformat() for d in offenders)
        if not drop_unscored:
            raise LabelMismatchException(f"Special days outside the scored dates: {listed}", offenders)
        logger.warning(f"Dropping {len(offenders)} special days outside the scored dates: {listed}")
        specials = specials.restricted_to(scored)
        if len(specials) == 0:
            raise LabelMismatchException("No special day falls within the scored dates", offenders)

    hits = []
    found = 0
    for s in ranking.scores:
        if s.date in specials:
            found += 1
        hits.append(found)
    return EvalCurves(len(ranking), len(specials), hits)


def headline_metrics(curves: EvalCurves, fraction: float = HEADLINE_FRACTION) -> Dict[str, float]:
    m, detection, fpr = curves.at_fraction(fraction)
    return {
        "days": curves.total,
        "specials": curves.n_specials,
        "cut_fraction": fraction,
        "cut_days": m,
        "detection_rate_at_cut": detection,
        "false_positive_rate_at_cut": fpr,
        "detected_at_cut": curves.hits[m - 1],
        "auc": curves.auc(),
    }


def score_slots(traces: Sequence[EntropyTrace], top_n: int = 20, warmup_days: int = 0) -> List[SlotScore]:
    """Largest |H(i) - H(i-1)| jumps between consecutive samples of each stream."""
    if top_n < 1:
        raise ValidationException(f"top_n must be >= 1, got {top_n}", "INVALID_TOP_N")
    all_days = [v[0] for tr in traces for v in tr.values]
    if not all_days:
        return []
    cutoff = min(all_days) + timedelta(days=warmup_days)
    flags = []
    for tr in traces:
        for (_, _, h0), (day, slot, h1) in zip(tr.values, tr.values[1:]):
            if day >= cutoff:
                flags.append(SlotScore(day, slot, tr.stream_id, abs(h1 - h0)))
    flags.sort(key=lambda f: (-f.delta, f.date, f.slot_index, f.stream))
    return flags[:top_n]


# ---------- files ----------

def write_ranking(ranking: AnomalyRanking, path: str, specials: Optional[SpecialDaySet] = None) -> None:
    try:
        with open(path, "w") as f:
            json.dump(ranking.to_records(specials), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise IoError(f"Failed to write ranking to '{path}': {str(e)}", "WRITE_FAILED")


def read_ranking(path: str, method: str = "endpoints") -> AnomalyRanking:
    try:
        with open(path) as f:
            records = json.load(f)
    except FileNotFoundError:
        raise IoError(f"Ranking file '{path}' not found", "FILE_NOT_FOUND")
    except json.JSONDecodeError as e:
        raise FormatError(f"Ranking file '{path}' is not valid JSON: {str(e)}", "BAD_RANKING_FILE")
    try:
        scores = [DayScore(date.fromisoformat(r["date"]), float(r["score"]), method, r.get("streams", []))
                  for r in records]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Ranking file '{path}' has a bad record: {str(e)}", "BAD_RANKING_FILE")
    return rank(scores)


def write_curves(curves: EvalCurves, path: str) -> None:
    try:
        curves.to_frame().to_csv(path, index=False, float_format=CURVE_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write curves to '{path}': {str(e)}", "WRITE_FAILED")


def write_slot_flags(flags: Sequence[SlotScore], path: str) -> None:
    frame = pd.DataFrame([(f.date.isoformat(), f.slot_index, f.stream, f.delta) for f in flags],
                         columns=SLOT_FLAG_COLUMNS)
    try:
        frame.to_csv(path, index=False, float_format=CURVE_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Failed to write slot flags to '{path}': {str(e)}", "WRITE_FAILED")
