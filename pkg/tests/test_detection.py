"""
Tests for day scoring, ranking and evaluation against labeled special days.
"""

import json
from datetime import date, timedelta

import pytest

from crowdsense.domain.Detection import AnomalyRanking, DayScore, EvalCurves, SpecialDaySet, builtin_specials
from crowdsense.domain.Entropy import EntropyTrace
from crowdsense.exceptions import (
    EmptyInputException,
    FormatError,
    IoError,
    LabelMismatchException,
    TooShortException,
    ValidationException,
)
from crowdsense.service import detection_service

pytestmark = pytest.mark.detect

START = date(2015, 9, 1)


def _days(n):
    return [START + timedelta(days=i) for i in range(n)]


def _step_trace(n_days, step_days=(), height=1.0, rep_index=0):
    """Two slots per day; the entropy rises by `height` within each step day."""
    values = []
    for day in _days(n_days):
        h1 = height if day in step_days else 0.0
        values.append((day, 0, 0.0))
        values.append((day, 1, h1))
    return EntropyTrace(0, rep_index, values)


def _ranking(n, special_ranks):
    """n days with distinct descending scores; returns (ranking, specials at the given ranks)."""
    days = _days(n)
    scores = [DayScore(d, float(n - i)) for i, d in enumerate(days)]
    specials = SpecialDaySet({days[r - 1]: f"event {r}" for r in special_ranks})
    return AnomalyRanking(scores), specials


class TestScoreDays:
    """Test per-day scores"""

    def test_step_day_scores_one(self):
        """Test only the day with an entropy step scores"""
        step = START + timedelta(days=10)
        scores = detection_service.score_days([_step_trace(20, {step})], warmup_days=3)
        by_day = {s.date: s.score for s in scores}
        assert by_day[step] == 1.0
        assert sum(by_day.values()) == 1.0

    def test_warmup_excluded(self):
        """Test days inside the warm-up are not scored"""
        scores = detection_service.score_days([_step_trace(20)], warmup_days=5)
        assert min(s.date for s in scores) == START + timedelta(days=5)
        assert len(scores) == 15

    def test_too_short(self):
        """Test traces no longer than the warm-up raise TooShortException"""
        with pytest.raises(TooShortException):
            detection_service.score_days([_step_trace(5)], warmup_days=5)

    def test_empty(self):
        """Test scoring no traces raises EmptyInputException"""
        with pytest.raises(EmptyInputException):
            detection_service.score_days([], warmup_days=0)

    def test_unknown_method(self):
        """Test unknown scoring methods are rejected"""
        with pytest.raises(ValidationException):
            detection_service.score_days([_step_trace(5)], method="median", warmup_days=0)

    def test_max_over_streams(self):
        """Test a day's score is the largest stream score, naming that stream"""
        step = START + timedelta(days=4)
        small = _step_trace(8, {step}, 0.5, rep_index=0)
        large = _step_trace(8, {step}, 1.5, rep_index=1)
        scores = detection_service.score_days([small, large], warmup_days=0)
        (hit,) = [s for s in scores if s.date == step]
        assert hit.score == 1.5
        assert hit.streams == ["0:1"]

    def test_consecutive_method(self):
        """Test consecutive scores compare end-of-day values of successive days"""
        step = START + timedelta(days=4)
        scores = detection_service.score_days([_step_trace(8, {step})], method="consecutive", warmup_days=0)
        by_day = {s.date: s.score for s in scores}
        # the first day has no predecessor
        assert START not in by_day
        assert by_day[step] == 1.0
        assert by_day[step + timedelta(days=1)] == 1.0
        assert by_day[step - timedelta(days=1)] == 0.0

    def test_scores_non_negative(self):
        """Test a drop in entropy still gives a positive score"""
        step = START + timedelta(days=3)
        values = [(d, s, 2.0 if (d == step and s == 1) else 3.0) for d in _days(6) for s in (0, 1)]
        scores = detection_service.score_days([EntropyTrace(0, 0, values)], warmup_days=0)
        assert {s.date: s.score for s in scores}[step] == 1.0


class TestRanking:
    """Test ranking order"""

    def test_descending_with_date_ties(self):
        """Test higher scores come first and ties go to the earlier date"""
        d1, d2, d3 = _days(3)
        ranking = detection_service.rank([DayScore(d3, 1.0), DayScore(d1, 0.5), DayScore(d2, 1.0)])
        assert ranking.dates == [d2, d3, d1]
        assert ranking.rank_of(d1) == 3
        assert ranking.rank_of(START - timedelta(days=1)) is None

    def test_permutation_invariant(self):
        """Test input order does not change the ranking"""
        scores = [DayScore(d, float(i % 4)) for i, d in enumerate(_days(12))]
        assert detection_service.rank(scores).dates == detection_service.rank(list(reversed(scores))).dates

    def test_empty(self):
        """Test an empty score list cannot be ranked"""
        with pytest.raises(EmptyInputException):
            detection_service.rank([])

    def test_invalid_score(self):
        """Test negative day scores are rejected"""
        with pytest.raises(ValidationException):
            DayScore(START, -0.1)

    def test_ranking_file_round_trip(self, tmp_path):
        """Test ranking.json reads back to the same order"""
        ranking, specials = _ranking(6, [2])
        path = tmp_path / "ranking.json"
        detection_service.write_ranking(ranking, str(path), specials)
        records = json.loads(path.read_text())
        assert [r["rank"] for r in records] == [1, 2, 3, 4, 5, 6]
        assert [r["is_special"] for r in records] == [False, True, False, False, False, False]
        assert detection_service.read_ranking(str(path)).dates == ranking.dates

    def test_read_missing_ranking(self, tmp_path):
        """Test a missing ranking file raises IoError"""
        with pytest.raises(IoError):
            detection_service.read_ranking(str(tmp_path / "nope.json"))

    def test_read_bad_ranking(self, tmp_path):
        """Test a ranking file with bad JSON raises FormatError"""
        path = tmp_path / "ranking.json"
        path.write_text("[{")
        with pytest.raises(FormatError):
            detection_service.read_ranking(str(path))


class TestEvaluate:
    """Test detection and false-positive curves"""

    def test_curves(self):
        """Test specials at ranks 1 and 3 out of 10"""
        ranking, specials = _ranking(10, [1, 3])
        curves = detection_service.evaluate(ranking, specials)
        assert curves.hits == [1, 1, 2, 2, 2, 2, 2, 2, 2, 2]
        assert curves.auc() == pytest.approx(0.9)
        assert curves.at_fraction(0.2) == (2, 0.5, 0.5)
        assert curves.false_positive_rate[0] == 0.0

    def test_curves_monotone(self):
        """Test detection rate never decreases and ends at 1"""
        ranking, specials = _ranking(30, [4, 9, 22, 30])
        rates = detection_service.evaluate(ranking, specials).detection_rate
        assert all(a <= b for a, b in zip(rates, rates[1:]))
        assert rates[-1] == 1.0

    def test_at_fraction_rounds_up(self):
        """Test the cut is ceil(fraction * days) and at least one day"""
        curves = EvalCurves(7, 1, [0, 0, 1, 1, 1, 1, 1])
        assert curves.at_fraction(0.2)[0] == 2
        assert curves.at_fraction(0.0)[0] == 1
        assert curves.at_fraction(1.0)[0] == 7

    def test_headline(self):
        """Test the headline metrics at 20%"""
        ranking, specials = _ranking(10, [1, 3])
        metrics = detection_service.headline_metrics(detection_service.evaluate(ranking, specials))
        assert metrics["cut_days"] == 2
        assert metrics["detected_at_cut"] == 1
        assert metrics["detection_rate_at_cut"] == 0.5

    def test_label_mismatch(self):
        """Test special days outside the scored dates raise LabelMismatchException"""
        ranking, specials = _ranking(5, [2])
        outside = START - timedelta(days=3)
        specials = SpecialDaySet({**specials.labels, outside: "early"})
        with pytest.raises(LabelMismatchException) as exc:
            detection_service.evaluate(ranking, specials)
        assert exc.value.offenders == [outside]

    def test_drop_unscored(self):
        """Test unscored special days can be dropped instead"""
        ranking, specials = _ranking(5, [2])
        specials = SpecialDaySet({**specials.labels, START - timedelta(days=3): "early"})
        curves = detection_service.evaluate(ranking, specials, drop_unscored=True)
        assert curves.n_specials == 1
        assert curves.hits[1] == 1

    def test_no_specials(self):
        """Test evaluation needs at least one special day"""
        ranking, _ = _ranking(5, [])
        with pytest.raises(ValidationException):
            detection_service.evaluate(ranking, SpecialDaySet())

    def test_curves_file(self, tmp_path):
        """Test curves.csv has one row per prefix length"""
        ranking, specials = _ranking(10, [1, 3])
        path = tmp_path / "curves.csv"
        detection_service.write_curves(detection_service.evaluate(ranking, specials), str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "m,fraction_processed,detection_rate,false_positive_rate"
        assert len(lines) == 11


class TestSlotScores:
    """Test within-day slot flags"""

    def test_largest_jump_first(self):
        """Test the biggest slot-to-slot change is flagged first"""
        step = START + timedelta(days=2)
        flags = detection_service.score_slots([_step_trace(5, {step}, 2.0)], top_n=3)
        assert flags[0].date == step
        assert flags[0].slot_index == 1
        assert flags[0].delta == 2.0
        assert len(flags) == 3

    def test_invalid_top_n(self):
        """Test top_n must be positive"""
        with pytest.raises(ValidationException):
            detection_service.score_slots([], top_n=0)


class TestSpecialDays:
    """Test special-day sets"""

    def test_same_day_events_merge(self):
        """Test two events on one date give one labeled date"""
        specials = SpecialDaySet.from_events([(START, "parade"), (START, "storm")])
        assert len(specials) == 1
        assert specials.labels[START] == "parade; storm"

    def test_csv_round_trip(self, tmp_path):
        """Test special days survive a CSV round trip"""
        specials = SpecialDaySet({START: "parade", START + timedelta(days=9): "storm"})
        path = tmp_path / "specials.csv"
        specials.to_csv(str(path))
        assert SpecialDaySet.from_csv(str(path)) == specials

    def test_csv_bad_date(self, tmp_path):
        """Test an unparseable date raises FormatError"""
        path = tmp_path / "specials.csv"
        path.write_text("date,label\nyesterday,x\n")
        with pytest.raises(FormatError):
            SpecialDaySet.from_csv(str(path))

    def test_builtin_nyc(self):
        """Test the built-in New York set lists one date per event"""
        specials = builtin_specials("nyc-2015")
        assert len(specials) == 13
        assert date(2015, 11, 26) in specials
        assert specials.labels[date(2016, 1, 23)] == "Jonas Storm"

    def test_unknown_builtin(self):
        """Test unknown built-in names are rejected"""
        with pytest.raises(ValidationException):
            builtin_specials("paris-2015")
