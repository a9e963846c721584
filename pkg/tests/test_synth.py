"""
Tests for the synthetic post generator and its scenarios.
"""

from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from crowdsense.domain.Detection import builtin_specials
from crowdsense.domain.GeoPoint import TIMES_SQUARE, GeoPoint
from crowdsense.domain.Scenario import Anomaly, Hotspot, Scenario
from crowdsense.exceptions import IoError, ValidationException
from crowdsense.service import geo_service, synth_service

pytestmark = pytest.mark.synth

EPOCH = date(1970, 1, 1)


def _local_days(frame, tz_offset_minutes=-300):
    days = (frame["ts"].to_numpy() + tz_offset_minutes * 60) // 86400
    return pd.Series([EPOCH + timedelta(days=int(d)) for d in days])


class TestGenerate:
    """Test generated post streams"""

    def test_deterministic(self, quiet_scenario):
        """Test the same seed gives an identical frame"""
        a, _ = synth_service.generate_frame(quiet_scenario)
        b, _ = synth_service.generate_frame(quiet_scenario)
        pd.testing.assert_frame_equal(a, b)

    def test_seed_changes_stream(self, quiet_scenario):
        """Test a different seed gives a different stream"""
        a, _ = synth_service.generate_frame(quiet_scenario)
        b, _ = synth_service.generate_frame(quiet_scenario.with_overrides(seed=6))
        assert not a["ts"].equals(b["ts"])

    def test_sorted_and_in_period(self, quiet_scenario):
        """Test posts are time ordered and fall on scenario days"""
        frame, _ = synth_service.generate_frame(quiet_scenario)
        assert frame["ts"].is_monotonic_increasing
        days = _local_days(frame)
        assert days.min() == quiet_scenario.start
        assert days.max() == quiet_scenario.end
        assert frame["id"].is_unique

    def test_total_volume(self, quiet_scenario):
        """Test the post count is within 2% of posts_per_day x days"""
        frame, _ = synth_service.generate_frame(quiet_scenario)
        expected = quiet_scenario.posts_per_day * quiet_scenario.days
        assert abs(len(frame) - expected) / expected < 0.02

    def test_daily_volume_stable(self, quiet_scenario):
        """Test daily counts vary by less than 10% on a quiet scenario"""
        frame, _ = synth_service.generate_frame(quiet_scenario)
        counts = _local_days(frame).value_counts()
        assert counts.std() / counts.mean() < 0.10

    def test_absence_day(self, small_scenario):
        """Test a 0.1 absence keeps about a tenth of the posts"""
        frame, specials = synth_service.generate_frame(small_scenario)
        counts = _local_days(frame).value_counts()
        absence = date(2015, 9, 27)
        ratio = counts[absence] / counts[absence - timedelta(days=7)]
        assert 0.07 < ratio < 0.13
        assert absence in specials

    def test_no_anomalies(self, quiet_scenario):
        """Test a scenario without anomalies has no special days"""
        _, specials = synth_service.generate_frame(quiet_scenario)
        assert len(specials) == 0

    def test_hotspot_shift(self, single_hotspot):
        """Test a 1500 m shift east moves the day's centroid by 1500 m"""
        start = date(2015, 9, 6)
        shift = Anomaly(start + timedelta(days=1), "hotspot_shift", 1500.0, bearing_deg=90.0)
        scenario = Scenario("shift", 3, start, 2, single_hotspot, [shift], 2000.0, background_weight=0.0)
        frame, _ = synth_service.generate_frame(scenario)
        shifted = frame[_local_days(frame) == shift.date]
        mid = geo_service.geographic_midpoint([GeoPoint(lat, lon) for lat, lon in zip(shifted["lat"], shifted["lon"])])
        east, north = geo_service.to_local_xy(np.array([mid.lat]), np.array([mid.lon]), TIMES_SQUARE)
        assert east[0] == pytest.approx(1500.0, abs=20.0)
        assert north[0] == pytest.approx(0.0, abs=20.0)

    def test_records_stream(self, quiet_scenario):
        """Test the record stream matches the frame"""
        frame, _ = synth_service.generate_frame(quiet_scenario)
        records, _ = synth_service.generate(quiet_scenario)
        records = list(records)
        assert len(records) == len(frame)
        assert records[0].id == frame["id"].iloc[0]
        assert records[-1].ts == int(frame["ts"].iloc[-1])


class TestScenarios:
    """Test scenario definitions"""

    def test_ground_truth_nyc_2015(self):
        """Test the built-in 2015 scenario plants an anomaly on every listed event"""
        assert synth_service.ground_truth(synth_service.nyc_2015()) == builtin_specials("nyc-2015")

    def test_nyc_like(self):
        """Test the nyc-like scenario plants 8 anomalies after its first month"""
        scenario = synth_service.load_scenario("nyc-like")
        assert len(scenario.anomalies) == 8
        assert min(a.date for a in scenario.anomalies) >= scenario.start + timedelta(days=28)

    def test_two_regime_layout(self):
        """Test the two-regime scenario switches layout at its switch day"""
        scenario = synth_service.two_regime(weeks=4, switch_week=2)
        before = scenario.layout_for(scenario.start)
        after = scenario.layout_for(scenario.start + timedelta(days=14))
        assert before[1].center != after[1].center
        assert before[0].center == after[0].center

    def test_json_round_trip(self, small_scenario, tmp_path):
        """Test a scenario survives a JSON round trip"""
        path = tmp_path / "scenario.json"
        small_scenario.to_json(str(path))
        assert Scenario.from_json(str(path)).to_dict() == small_scenario.to_dict()

    def test_load_missing_file(self, tmp_path):
        """Test loading a missing scenario file raises IoError"""
        with pytest.raises(IoError):
            synth_service.load_scenario(str(tmp_path / "nope.json"))

    def test_anomaly_outside_period(self, single_hotspot):
        """Test anomalies must fall inside the scenario period"""
        start = date(2015, 9, 6)
        with pytest.raises(ValidationException):
            Scenario("bad", 1, start, 3, single_hotspot, [Anomaly(start + timedelta(days=5), "crowd_surge", 2.0)])

    @pytest.mark.parametrize("start_minute,end_minute", [(600, 600), (-1, 60), (0, 1441)])
    def test_anomaly_window(self, start_minute, end_minute):
        """Test anomaly windows must satisfy 0 <= start < end <= 1440"""
        with pytest.raises(ValidationException):
            Anomaly(date(2015, 9, 6), "crowd_surge", 2.0, start_minute, end_minute)

    def test_unknown_anomaly_type(self):
        """Test unknown anomaly types are rejected"""
        with pytest.raises(ValidationException):
            Anomaly(date(2015, 9, 6), "riot", 2.0)

    def test_unknown_profile(self):
        """Test hotspots need a known profile or 24 hourly values"""
        with pytest.raises(ValidationException):
            Hotspot("x", TIMES_SQUARE, profile="weekend")
        with pytest.raises(ValidationException):
            Hotspot("x", TIMES_SQUARE, profile=[1.0] * 23)

    def test_overrides(self, small_scenario):
        """Test overrides change only seed and volume"""
        changed = small_scenario.with_overrides(seed=99, posts_per_day=500.0)
        assert changed.seed == 99
        assert changed.posts_per_day == 500.0
        assert changed.anomalies[0].date == small_scenario.anomalies[0].date
