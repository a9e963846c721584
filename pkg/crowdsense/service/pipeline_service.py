"""File-based pipeline stages, the full run, the parameter sweep and the ledger bookkeeping around them."""

import json
import logging
import os
from datetime import date, datetime, timezone
from itertools import product
from multiprocessing import Pool
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .. import database, db, settings
from ..domain.Detection import SpecialDaySet, builtin_specials, BUILTIN_SPECIALS
from ..domain.Entropy import ESTIMATORS
from ..domain.PipelineConfig import PipelineConfig
from ..domain.Post import IngestStats
from ..domain.Symbols import SymbolizeStats
from ..exceptions import (
    CrowdSenseException,
    DataPersistenceException,
    FileIOException,
    StageFailedException,
    ValidationException,
)
from . import (
    clustering_service,
    detection_service,
    entropy_service,
    ingest_service,
    study_service,
    symbolize_service,
    synth_service,
)

logger = logging.getLogger(__name__)

STAGES = ("synth", "ingest", "represent", "symbolize", "entropy", "detect", "evaluate", "study")
PIPELINE_STAGES = ("ingest", "represent", "symbolize", "entropy", "detect", "evaluate")
DEFAULT_FILES = {
    "synth": "posts.csv",
    "ingest": "buckets.csv",
    "represent": "reps.csv",
    "symbolize": "sequences.csv",
    "entropy": "traces.csv",
    "detect": "ranking.json",
    "evaluate": "curves.csv",
    "study": "study.csv",
}
SWEEP_SLOT_MINUTES = (15, 30)
SWEEP_GRIDS = (5, 7)
SWEEP_WINDOWS = (2, 4, 6, 8)
COMPARISON_COLUMNS = ["slot_minutes", "k", "L", "window_weeks", "estimator", "status", "days", "specials",
                      "cut_days", "detection_rate_at_cut", "false_positive_rate_at_cut", "auc"]

Period = Optional[Tuple[date, date]]


def _sibling(path: str, name: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(path)), name)


def _ensure_dir(path: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(folder, exist_ok=True)
    except OSError as e:
        raise FileIOException(f"Cannot create output directory '{folder}': {str(e)}", "WRITE_FAILED")


def write_json(data: Any, path: str) -> None:
    try:
        with open(path, "w") as f:
            json.dump(data, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
    except OSError as e:
        raise FileIOException(f"Failed to write '{path}': {str(e)}", "WRITE_FAILED")


def resolve_specials(specials: Union[None, str, SpecialDaySet]) -> Optional[SpecialDaySet]:
    """A SpecialDaySet, a built-in set name or a date,label CSV path."""
    if specials is None or isinstance(specials, SpecialDaySet):
        return specials
    if specials in BUILTIN_SPECIALS:
        return builtin_specials(specials)
    return SpecialDaySet.from_csv(specials)


def _local_period(frame: pd.DataFrame, tz_offset_minutes: int) -> Period:
    if len(frame) == 0:
        return None
    ts = frame["ts"].to_numpy(dtype=np.int64) + tz_offset_minutes * 60
    first = date.fromordinal(date(1970, 1, 1).toordinal() + int(ts.min() // 86400))
    last = date.fromordinal(date(1970, 1, 1).toordinal() + int(ts.max() // 86400))
    return first, last


def _slot_period(keys) -> Period:
    days = [day for day, _ in keys]
    return (min(days), max(days)) if days else None


# ---------- stages ----------

def stage_synth(config: PipelineConfig, scenario: str, out_path: str, seed: Optional[int] = None,
                posts_per_day: Optional[float] = None, specials_path: Optional[str] = None) -> Dict[str, Any]:
    scen = synth_service.load_scenario(scenario).with_overrides(seed, posts_per_day)
    frame, specials = synth_service.generate_frame(scen)
    ingest_service.write_posts(frame, out_path)
    specials_path = specials_path or _sibling(out_path, "specials.csv")
    specials.to_csv(specials_path)
    scen.to_json(_sibling(out_path, "scenario.json"))
    return {"scenario": scen.name, "seed": scen.seed, "posts": int(len(frame)), "days": scen.days,
            "start": scen.start.isoformat(), "end": scen.end.isoformat(), "anomalies": len(scen.anomalies),
            "special_days": len(specials), "specials_path": specials_path}


def stage_ingest(config: PipelineConfig, in_path: str, out_path: str, period: Period = None,
                 field_map: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    stats = IngestStats()
    frame = ingest_service.load_posts_frame(in_path, field_map=field_map, stats=stats)
    period = period or _local_period(frame, config.tz_offset_minutes)
    buckets = ingest_service.bucket(frame, config.region, period, config.slot_minutes,
                                    config.tz_offset_minutes, stats) if period else {}
    ingest_service.write_buckets(buckets, out_path)
    summary = stats.to_dict()
    summary.update({"slots": len(buckets),
                    "period": [period[0].isoformat(), period[1].isoformat()] if period else None})
    return summary


def stage_represent(config: PipelineConfig, in_path: str, out_path: str, workers: int = 1) -> Dict[str, Any]:
    buckets = ingest_service.read_buckets(in_path, config.slot_minutes)
    skipped: Dict = {}
    reps, counts = clustering_service.represent_all(buckets, config.k, config.dbscan, workers, skipped)
    clustering_service.write_reps(reps, out_path, skipped)
    return dict(counts, k=config.k)


def stage_symbolize(config: PipelineConfig, in_path: str, out_path: str, period: Period = None) -> Dict[str, Any]:
    reps, skipped = clustering_service.read_reps(in_path, config.slot_minutes)
    period = period or _slot_period(list(reps) + list(skipped))
    stats = SymbolizeStats()
    sequences = symbolize_service.build_sequences(reps, config.grid, period, config.slot_minutes, config.k,
                                                  config.joint, stats)
    symbolize_service.write_sequences(sequences, out_path)
    return dict(stats.to_dict(), sequences=len(sequences), alphabet_size=config.alphabet_size(),
                joint=config.joint)


def stage_entropy(config: PipelineConfig, in_path: str, out_path: str) -> Dict[str, Any]:
    sequences = symbolize_service.read_sequences(in_path)
    traces = entropy_service.compute_traces(sequences, config.entropy, config.alphabet_size())
    entropy_service.write_traces(traces, out_path)
    return {"traces": len(traces), "samples": sum(len(t) for t in traces), "estimator": config.estimator,
            "window_weeks": config.window_weeks}


def stage_detect(config: PipelineConfig, in_path: str, out_path: str,
                 specials: Union[None, str, SpecialDaySet] = None,
                 slot_flags_path: Optional[str] = None) -> Dict[str, Any]:
    traces = entropy_service.read_traces(in_path, config.entropy)
    scores = detection_service.score_days(traces, config.score_method, config.warmup_days)
    ranking = detection_service.rank(scores)
    detection_service.write_ranking(ranking, out_path, resolve_specials(specials))
    summary = {"days": len(ranking), "method": config.score_method, "warmup_days": config.warmup_days,
               "top": [s.date.isoformat() for s in ranking.scores[:5]]}
    if config.top_slots:
        flags = detection_service.score_slots(traces, config.top_slots, config.warmup_days)
        path = slot_flags_path or _sibling(out_path, "slot_flags.csv")
        detection_service.write_slot_flags(flags, path)
        summary["slot_flags"] = len(flags)
    return summary


def stage_evaluate(config: PipelineConfig, in_path: str, out_path: str,
                   specials: Union[None, str, SpecialDaySet] = None,
                   metrics_path: Optional[str] = None) -> Dict[str, Any]:
    labeled = resolve_specials(specials)
    if labeled is None:
        raise ValidationException("evaluate needs special days (--specials)", "NO_SPECIALS")
    ranking = detection_service.read_ranking(in_path, config.score_method)
    curves = detection_service.evaluate(ranking, labeled, config.drop_unscored_specials)
    detection_service.write_curves(curves, out_path)
    metrics = detection_service.headline_metrics(curves)
    write_json(metrics, metrics_path or _sibling(out_path, "metrics.json"))
    return metrics


def stage_study(config: PipelineConfig, in_path: str, out_path: str, max_slots: Optional[int] = None,
                runs: int = 5) -> Dict[str, Any]:
    buckets = ingest_service.read_buckets(in_path, config.slot_minutes)
    k = max(2, config.k)
    table = study_service.compare_options(buckets, k, config.dbscan, config.seed, max_slots)
    try:
        table.to_csv(out_path, index=False, float_format="%.12f", lineterminator="\n")
    except OSError as e:
        raise FileIOException(f"Failed to write study table to '{out_path}': {str(e)}", "WRITE_FAILED")
    summary = study_service.summarize_options(table)
    summary["k"] = k
    if buckets:
        largest = max(sorted(buckets), key=lambda s: len(buckets[s]))
        try:
            summary["reproducibility"] = study_service.reproducibility(buckets[largest], k, config.dbscan, runs,
                                                                       config.seed)
        except CrowdSenseException as e:
            summary["reproducibility"] = {"error": e.error_code}
    summary["silhouette_by_k"] = {str(kk): v for kk, v in
                                  study_service.compare_k(buckets, config.dbscan, max_slots=max_slots).items()}
    return summary


STAGE_FUNCS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "represent": stage_represent,
    "symbolize": stage_symbolize,
    "entropy": stage_entropy,
    "detect": stage_detect,
    "evaluate": stage_evaluate,
    "study": stage_study,
}


# ---------- runner ----------

def _record(stage, status, exit_code, started, config, summary, in_path, out_path, error_code) -> None:
    try:
        database.init_db()
        db.record_stage_run(stage, status, exit_code, started, datetime.now(timezone.utc).replace(tzinfo=None),
                            config.to_dict(), summary, in_path, out_path, error_code)
    except DataPersistenceException as e:
        logger.error(f"Run ledger not updated: {e.message}")
    except Exception as e:
        logger.error(f"Run ledger not updated: {str(e)}")


def run_stage(stage: str, config: PipelineConfig, in_path: Optional[str], out_path: str,
              ledger: Optional[bool] = None, **options) -> Tuple[int, Dict[str, Any]]:
    """Run one stage: (exit code, summary). Writes <out>.summary.json and config.json next to the output."""
    if stage not in STAGE_FUNCS:
        raise ValidationException(f"Unknown stage '{stage}', expected one of {STAGES}", "INVALID_STAGE")
    ledger = settings.LEDGER_ENABLED if ledger is None else ledger
    started = datetime.now(timezone.utc).replace(tzinfo=None)
    error_code = None
    try:
        if stage != "synth" and not (in_path and os.path.exists(in_path)):
            raise FileIOException(f"Input file '{in_path}' not found", "FILE_NOT_FOUND")
        _ensure_dir(out_path)
        config.write(_sibling(out_path, "config.json"))
        summary = STAGE_FUNCS[stage](config, in_path, out_path, **options)
        exit_code = 0
    except CrowdSenseException as e:
        logger.error(f"{stage} failed: {e.message}")
        exit_code, error_code = e.exit_code, e.error_code
        summary = {"error": e.message, "error_code": e.error_code}
    except Exception as e:
        logger.error(f"{stage} failed unexpectedly: {str(e)}")
        exit_code, error_code = 1, "UNEXPECTED"
        summary = {"error": str(e), "error_code": error_code}

    summary = dict(summary, stage=stage, status="ok" if exit_code == 0 else "error", exit_code=exit_code,
                   output=out_path)
    try:
        if os.path.isdir(os.path.dirname(os.path.abspath(out_path))):
            write_json(summary, f"{out_path}.summary.json")
    except FileIOException as e:
        logger.error(e.message)
    if exit_code == 0:
        logger.info(f"{stage} finished: {out_path}")
    if ledger:
        _record(stage, summary["status"], exit_code, started, config, summary, in_path, out_path, error_code)
    return exit_code, summary


def is_scenario(source: str) -> bool:
    return source in synth_service.BUILTIN_SCENARIOS or source.lower().endswith(".json")


def run_all(config: PipelineConfig, source: str, out_dir: str, specials: Union[None, str, SpecialDaySet] = None,
            workers: int = 1, seed: Optional[int] = None, posts_per_day: Optional[float] = None,
            ledger: Optional[bool] = None) -> Tuple[int, Dict[str, Dict[str, Any]]]:
    """Every stage into one directory. `source` is a scenario (built-in name or JSON) or a post file."""
    paths = {stage: os.path.join(out_dir, name) for stage, name in DEFAULT_FILES.items()}
    summaries: Dict[str, Dict[str, Any]] = {}

    if is_scenario(source):
        code, summaries["synth"] = run_stage("synth", config, source, paths["synth"], ledger,
                                             seed=seed, posts_per_day=posts_per_day)
        if code:
            return code, summaries
        posts = paths["synth"]
        if specials is None:
            specials = summaries["synth"]["specials_path"]
    else:
        posts = source

    inputs = {"ingest": posts, "represent": paths["ingest"], "symbolize": paths["represent"],
              "entropy": paths["symbolize"], "detect": paths["entropy"], "evaluate": paths["detect"]}
    options: Dict[str, Dict[str, Any]] = {"represent": {"workers": workers}, "detect": {"specials": specials},
                                          "evaluate": {"specials": specials}}
    for stage in PIPELINE_STAGES:
        if stage == "evaluate" and specials is None:
            break
        code, summaries[stage] = run_stage(stage, config, inputs[stage], paths[stage], ledger,
                                           **options.get(stage, {}))
        if code:
            return code, summaries
    return 0, summaries


# ---------- sweep ----------

def _sweep_leaf(job) -> Dict[str, Any]:
    seq_path, config_dict, combo_dir, specials = job
    config = PipelineConfig.from_dict(config_dict)
    row = {"slot_minutes": config.slot_minutes, "k": config.k, "L": config.L, "window_weeks": config.window_weeks,
           "estimator": config.estimator, "status": "ok"}
    try:
        os.makedirs(combo_dir, exist_ok=True)
        config.write(os.path.join(combo_dir, "config.json"))
        sequences = symbolize_service.read_sequences(seq_path)
        traces = entropy_service.compute_traces(sequences, config.entropy, config.alphabet_size())
        ranking = detection_service.rank(detection_service.score_days(traces, config.score_method,
                                                                      config.warmup_days))
        detection_service.write_ranking(ranking, os.path.join(combo_dir, "ranking.json"), specials)
        if specials is not None:
            curves = detection_service.evaluate(ranking, specials, config.drop_unscored_specials)
            detection_service.write_curves(curves, os.path.join(combo_dir, "curves.csv"))
            metrics = detection_service.headline_metrics(curves)
            write_json(metrics, os.path.join(combo_dir, "metrics.json"))
            row.update({c: metrics[c] for c in ("days", "specials", "cut_days", "detection_rate_at_cut",
                                               "false_positive_rate_at_cut", "auc")})
        else:
            row["days"] = len(ranking)
    except CrowdSenseException as e:
        logger.error(f"Sweep combination {combo_dir} failed: {e.message}")
        row["status"] = e.error_code or "error"
    return row


def sweep(config: PipelineConfig, posts_path: str, out_dir: str, specials: Union[None, str, SpecialDaySet] = None,
          slot_minutes: Sequence[int] = SWEEP_SLOT_MINUTES, grids: Sequence[int] = SWEEP_GRIDS,
          windows: Sequence[int] = SWEEP_WINDOWS, estimators: Sequence[str] = ESTIMATORS,
          ks: Optional[Sequence[int]] = None, workers: int = 1) -> pd.DataFrame:
    """One directory per (slot_minutes, k, L, W, estimator) plus comparison.csv.

    Upstream artifacts are shared: buckets per slot length, representatives per (slot length, k),
    sequences per (slot length, k, L).
    """
    labeled = resolve_specials(specials)
    ks = list(ks) if ks else [config.k]
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for minutes in slot_minutes:
        base = config.overlay(slot_minutes=minutes)
        buckets_path = os.path.join(out_dir, f"buckets_s{minutes}.csv")
        _check(run_stage("ingest", base, posts_path, buckets_path, False))
        for k in ks:
            kcfg = base.overlay(k=k, joint=base.joint and k > 1)
            reps_path = os.path.join(out_dir, f"reps_s{minutes}_k{k}.csv")
            _check(run_stage("represent", kcfg, buckets_path, reps_path, False, workers=workers))
            for grid in grids:
                gcfg = kcfg.overlay(L=grid)
                seq_path = os.path.join(out_dir, f"sequences_s{minutes}_k{k}_L{grid}.csv")
                _check(run_stage("symbolize", gcfg, reps_path, seq_path, False))
                for window, estimator in product(windows, estimators):
                    leaf = gcfg.overlay(window_weeks=window, estimator=estimator)
                    combo_dir = os.path.join(out_dir, f"s{minutes}_k{k}_L{grid}_W{window}_{estimator}")
                    jobs.append((seq_path, leaf.to_dict(), combo_dir, labeled))

    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            rows = pool.map(_sweep_leaf, jobs)
    else:
        rows = [_sweep_leaf(job) for job in jobs]
    table = pd.DataFrame(rows, columns=COMPARISON_COLUMNS)
    config.write(os.path.join(out_dir, "config.json"))
    try:
        table.to_csv(os.path.join(out_dir, "comparison.csv"), index=False, float_format="%.12f",
                     lineterminator="\n")
    except OSError as e:
        raise FileIOException(f"Failed to write comparison table: {str(e)}", "WRITE_FAILED")
    logger.info(f"Sweep finished: {len(table)} combinations in {out_dir}")
    return table


def _check(result: Tuple[int, Dict[str, Any]]) -> Dict[str, Any]:
    code, summary = result
    if code:
        raise StageFailedException(summary.get("error", "stage failed"), summary.get("error_code"), code)
    return summary
