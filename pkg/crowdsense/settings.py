import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

DATABASE_URL = os.getenv('CROWDSENSE_DATABASE_URL', 'sqlite:///crowdsense_runs.db')
LEDGER_ENABLED = os.getenv('CROWDSENSE_LEDGER', 'on').strip().lower() not in ('off', '0', 'false', 'no')
LOG_LEVEL = os.getenv('CROWDSENSE_LOG_LEVEL', 'INFO').strip().upper()


def _int_env(name, default):
    try:
        return max(1, int(os.getenv(name, str(default))))
    except ValueError:
        return default


WORKERS = _int_env('CROWDSENSE_WORKERS', 1)
