import argparse
import os
from datetime import date
from typing import Any, Dict, List, Optional, Sequence

from . import constants, printer
from .. import database, db, settings
from ..domain.Entropy import ESTIMATORS
from ..domain.Detection import SCORE_METHODS
from ..domain.PipelineConfig import PipelineConfig
from ..exceptions import ConfigurationException, CrowdSenseException, ValidationException
from ..service import pipeline_service


def _center(text: str):
    try:
        lat, lon = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LAT,LON, got '{text}'")
    return lat, lon


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _day(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got '{text}'")


def _config_flags() -> argparse.ArgumentParser:
    """Flags shared by every stage; None means 'keep the configured value'."""
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="JSON file with configuration values (flags override it)")
    g.add_argument("--region-center", type=_center, metavar="LAT,LON")
    g.add_argument("--radius-km", type=float)
    g.add_argument("--slot-min", type=int, dest="slot_minutes")
    g.add_argument("--k", type=int, choices=(1, 2, 3))
    g.add_argument("--grid", type=int, dest="L", help="cells per grid side")
    g.add_argument("--eps-m", type=float)
    g.add_argument("--min-points", type=int)
    g.add_argument("--estimator", choices=ESTIMATORS)
    g.add_argument("--window-weeks", type=int, help="0 for a cumulative trace")
    g.add_argument("--score-method", choices=SCORE_METHODS)
    g.add_argument("--warmup-days", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--joint", action="store_true", default=None, help="one joint symbol stream per weekday")
    g.add_argument("--top-slots", type=int, help="also write the N largest slot-level entropy jumps")
    g.add_argument("--drop-unscored-specials", action="store_true", default=None)
    g.add_argument("--tz-offset-min", type=int, dest="tz_offset_minutes")
    g.add_argument("--no-ledger", action="store_true", help="do not record the run in the ledger")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _config_flags()
    parser = argparse.ArgumentParser(prog="crowdsense",
                                     description="Crowd anomaly detection from geo-located posts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(constants.SYNTH, parents=[common], help="generate a synthetic post stream")
    p.add_argument("--scenario", default=constants.DEFAULT_SCENARIO, help="built-in name or JSON file")
    p.add_argument("--out", required=True, help="posts file (.csv or .jsonl)")
    p.add_argument("--posts-per-day", type=float)
    p.add_argument("--specials-out", help="ground-truth CSV (default: specials.csv next to --out)")

    p = sub.add_parser(constants.INGEST, parents=[common], help="bucket posts into time slots")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--start", type=_day)
    p.add_argument("--end", type=_day)

    p = sub.add_parser(constants.REPRESENT, parents=[common], help="representative points per slot")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=settings.WORKERS)

    p = sub.add_parser(constants.SYMBOLIZE, parents=[common], help="grid-cell symbol sequences")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--start", type=_day)
    p.add_argument("--end", type=_day)

    p = sub.add_parser(constants.ENTROPY, parents=[common], help="entropy traces")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser(constants.DETECT, parents=[common], help="score and rank days")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--specials", help="special-day CSV or built-in set, only to flag ranked days")

    p = sub.add_parser(constants.EVALUATE, parents=[common], help="detection / false-positive curves")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--specials", required=True, help="special-day CSV or built-in set (nyc-2015)")

    p = sub.add_parser(constants.STUDY, parents=[common], help="compare representative options by silhouette")
    p.add_argument("--in", dest="in_path", required=True, help="buckets.csv")
    p.add_argument("--out", required=True)
    p.add_argument("--max-slots", type=int)
    p.add_argument("--runs", type=int, default=5)

    p = sub.add_parser(constants.SWEEP, parents=[common], help="parameter sweep with a comparison table")
    p.add_argument("--in", dest="in_path", required=True, help="posts file or scenario")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--specials")
    p.add_argument("--workers", type=int, default=settings.WORKERS)
    p.add_argument("--sweep-k", type=_int_list, help="e.g. 1,2")
    p.add_argument("--slot-mins", type=_int_list, default=list(pipeline_service.SWEEP_SLOT_MINUTES))
    p.add_argument("--grids", type=_int_list, default=list(pipeline_service.SWEEP_GRIDS))
    p.add_argument("--windows", type=_int_list, default=list(pipeline_service.SWEEP_WINDOWS))
    p.add_argument("--estimators", type=_str_list, default=list(ESTIMATORS))
    p.add_argument("--posts-per-day", type=float)

    p = sub.add_parser(constants.ALL, parents=[common], help="run every stage into one directory")
    p.add_argument("--in", dest="in_path", default=constants.DEFAULT_SCENARIO, help="scenario or posts file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--specials")
    p.add_argument("--workers", type=int, default=settings.WORKERS)
    p.add_argument("--posts-per-day", type=float)

    p = sub.add_parser(constants.RUNS, help="list recorded stage runs")
    p.add_argument("--stage")
    p.add_argument("--limit", type=int, default=constants.RUNS_LIMIT)
    return parser


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """Configuration file (if any) overlaid with the explicit flags, validated as a whole."""
    base = PipelineConfig.from_json(args.config) if getattr(args, "config", None) else PipelineConfig()
    changes: Dict[str, Any] = {}
    if getattr(args, "region_center", None):
        changes["center_lat"], changes["center_lon"] = args.region_center
    for name in ("radius_km", "slot_minutes", "k", "L", "eps_m", "min_points", "estimator", "score_method",
                 "warmup_days", "seed", "joint", "top_slots", "drop_unscored_specials", "tz_offset_minutes"):
        changes[name] = getattr(args, name, None)
    config = base.overlay(**changes)
    window = getattr(args, "window_weeks", None)
    if window is not None:
        if window < 0:
            raise ValidationException("--window-weeks must be >= 0", "INVALID_WINDOW")
        d = config.to_dict()
        d["window_weeks"] = window or None
        config = PipelineConfig.from_dict(d)
    return config


def _ledger(args) -> Optional[bool]:
    return False if getattr(args, "no_ledger", False) else None


def _period(args):
    start, end = getattr(args, "start", None), getattr(args, "end", None)
    if (start is None) != (end is None):
        raise ValidationException("--start and --end go together", "INVALID_PERIOD")
    if start and start > end:
        raise ValidationException(f"Period start {start} is after end {end}", "INVALID_PERIOD")
    return (start, end) if start else None


def run_stage_command(args: argparse.Namespace, config: PipelineConfig) -> int:
    command = args.command
    options: Dict[str, Any] = {}
    in_path = getattr(args, "in_path", None)
    if command == constants.SYNTH:
        in_path = args.scenario
        options = {"seed": args.seed, "posts_per_day": args.posts_per_day, "specials_path": args.specials_out}
    elif command in (constants.INGEST, constants.SYMBOLIZE):
        options = {"period": _period(args)}
    elif command == constants.REPRESENT:
        options = {"workers": args.workers}
    elif command in (constants.DETECT, constants.EVALUATE):
        options = {"specials": args.specials}
    elif command == constants.STUDY:
        options = {"max_slots": args.max_slots, "runs": args.runs}
    code, summary = pipeline_service.run_stage(command, config, in_path, args.out, _ledger(args), **options)
    printer.print_stage(command, code, summary)
    return code


def run_all_command(args: argparse.Namespace, config: PipelineConfig) -> int:
    code, summaries = pipeline_service.run_all(config, args.in_path, args.out_dir, args.specials, args.workers,
                                               args.seed, args.posts_per_day, _ledger(args))
    for stage, summary in summaries.items():
        printer.print_stage(stage, summary["exit_code"], summary)
    return code


def run_sweep_command(args: argparse.Namespace, config: PipelineConfig) -> int:
    posts, specials = args.in_path, args.specials
    if pipeline_service.is_scenario(posts):
        posts = os.path.join(args.out_dir, "posts.csv")
        code, summary = pipeline_service.run_stage(constants.SYNTH, config, args.in_path, posts, _ledger(args),
                                                   seed=args.seed, posts_per_day=args.posts_per_day)
        printer.print_stage(constants.SYNTH, code, summary)
        if code:
            return code
        specials = specials or summary["specials_path"]
    table = pipeline_service.sweep(config, posts, args.out_dir, specials, args.slot_mins, args.grids, args.windows,
                                   args.estimators, args.sweep_k, args.workers)
    printer.print_comparison(table)
    return constants.EXIT_OK


def run_runs_command(args: argparse.Namespace) -> int:
    database.init_db()
    printer.print_runs(db.query_stage_runs(args.stage, args.limit))
    return constants.EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    if args.command == constants.RUNS:
        return run_runs_command(args)
    config = build_config(args)
    if args.command == constants.ALL:
        return run_all_command(args, config)
    if args.command == constants.SWEEP:
        return run_sweep_command(args, config)
    return run_stage_command(args, config)


def exit_code_for(error: CrowdSenseException) -> int:
    return getattr(error, "exit_code", constants.EXIT_ERROR)


def parse(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    try:
        return build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse usage errors are configuration errors
        if e.code not in (0, None):
            raise ConfigurationException("Invalid command line", "USAGE") from None
        raise
