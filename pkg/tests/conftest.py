"""
Configuration for pytest tests.

Sets up an in-memory run ledger plus small synthetic fixtures (point blobs,
scenarios, configurations) shared by the test modules.
"""

from datetime import date

import numpy as np
import pytest
from numpy.random import PCG64, Generator
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from crowdsense import db
from crowdsense.domain.GeoPoint import TIMES_SQUARE
from crowdsense.domain.PipelineConfig import PipelineConfig
from crowdsense.domain.Scenario import Anomaly, Hotspot, Scenario
from crowdsense.models import Base
from crowdsense.service import geo_service, synth_service

# Use SQLite for testing
TEST_DATABASE_URL = "sqlite:///:memory:"

# Sunday, so day offsets 7, 14, ... are Sundays too
SCENARIO_START = date(2015, 9, 6)


@pytest.fixture(scope="session")
def test_engine():
    """Create test database engine"""
    engine = create_engine(TEST_DATABASE_URL, echo=False)
    Base.metadata.create_all(bind=engine)
    return engine


@pytest.fixture(scope="function")
def test_session(test_engine):
    """Create a new test database session for each test"""
    connection = test_engine.connect()
    transaction = connection.begin()

    Session = sessionmaker(bind=connection)
    session = Session()

    yield session

    session.close()
    transaction.rollback()
    connection.close()


@pytest.fixture(scope="function")
def test_db(test_session, monkeypatch):
    """Patch ledger functions to use the test session"""
    monkeypatch.setattr(db, "get_session", lambda: test_session)
    monkeypatch.setattr(db, "close_session", lambda session: None)
    yield test_session


@pytest.fixture
def make_blob():
    """Factory: n points scattered with a Gaussian of `spread_m` meters around `center`"""

    def _make(center, n, spread_m=50.0, seed=0):
        rng = Generator(PCG64(seed))
        east = rng.normal(0.0, spread_m, n)
        north = rng.normal(0.0, spread_m, n)
        return geo_service.from_local_xy(east, north, center)

    return _make


@pytest.fixture
def two_blobs(make_blob):
    """120 + 80 points in two tight blobs 3 km apart, as (lats, lons, center_a, center_b)"""
    center_a = TIMES_SQUARE
    center_b = geo_service.offset_point(TIMES_SQUARE, 3000.0, 0.0)
    lat_a, lon_a = make_blob(center_a, 120, 50.0, seed=1)
    lat_b, lon_b = make_blob(center_b, 80, 50.0, seed=2)
    return np.concatenate([lat_a, lat_b]), np.concatenate([lon_a, lon_b]), center_a, center_b


@pytest.fixture
def small_scenario():
    """Five weeks around Times Square at 3000 posts/day with an absence and a surge"""
    anomalies = [
        Anomaly(date(2015, 9, 27), "crowd_absence", 0.1, label="planted absence"),
        Anomaly(date(2015, 10, 4), "crowd_surge", 8.0, 600, 1380, label="planted surge"),
    ]
    return Scenario("small", 11, SCENARIO_START, 35, synth_service.manhattan_hotspots(), anomalies, 3000.0,
                    weekday_multipliers=synth_service.weekday_multipliers())


@pytest.fixture
def quiet_scenario():
    """Two weeks, no anomalies, 2000 posts/day"""
    return Scenario("quiet", 5, SCENARIO_START, 14, synth_service.manhattan_hotspots(), (), 2000.0)


@pytest.fixture
def single_hotspot():
    """One flat-profile hotspot at Times Square without background posts"""
    return [Hotspot("square", TIMES_SQUARE, 100.0, 1.0, "flat")]


@pytest.fixture
def small_config():
    """Hourly slots and a one-week warm-up, sized for the small scenarios"""
    return PipelineConfig(slot_minutes=60, min_points=5, warmup_days=7, window_weeks=2)


@pytest.fixture
def scenario_file(small_scenario, tmp_path):
    path = tmp_path / "scenario.json"
    small_scenario.to_json(str(path))
    return str(path)
