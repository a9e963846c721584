# cli/constants.py

# Subcommands
SYNTH = "synth"
INGEST = "ingest"
REPRESENT = "represent"
SYMBOLIZE = "symbolize"
ENTROPY = "entropy"
DETECT = "detect"
EVALUATE = "evaluate"
STUDY = "study"
SWEEP = "sweep"
ALL = "all"
RUNS = "runs"

STAGE_COMMANDS = (SYNTH, INGEST, REPRESENT, SYMBOLIZE, ENTROPY, DETECT, EVALUATE, STUDY)

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_DEGENERATE = 5

EXIT_LABELS = {
    EXIT_OK: "ok",
    EXIT_ERROR: "error",
    EXIT_CONFIG: "config",
    EXIT_IO: "io",
    EXIT_FORMAT: "format",
    EXIT_DEGENERATE: "degenerate-data",
}

# Default scenario for synth / all
DEFAULT_SCENARIO = "nyc-like"
RUNS_LIMIT = 20
