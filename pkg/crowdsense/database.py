"""Engine and sessions for the run ledger."""

import logging
import os

from sqlalchemy import create_engine
from sqlalchemy.engine import make_url
from sqlalchemy.orm import sessionmaker

from .models import Base
from .settings import DATABASE_URL

logger = logging.getLogger(__name__)


def _make_engine(url: str):
    parsed = make_url(url)
    if parsed.get_backend_name() != "sqlite":
        return create_engine(url, echo=False, pool_pre_ping=True)
    folder = os.path.dirname(parsed.database or "")
    if folder:
        os.makedirs(folder, exist_ok=True)
    return create_engine(url, echo=False, connect_args={"check_same_thread": False})


engine = _make_engine(DATABASE_URL)
SessionLocal = sessionmaker(bind=engine, expire_on_commit=False)

_tables_ready = False


def init_db():
    """Create the ledger tables once per process."""
    global _tables_ready
    if _tables_ready:
        return
    Base.metadata.create_all(bind=engine)
    _tables_ready = True
    logger.debug(f"Run ledger ready at {engine.url.render_as_string(hide_password=True)}")


def get_session():
    return SessionLocal()


def close_session(session):
    if session:
        session.close()
