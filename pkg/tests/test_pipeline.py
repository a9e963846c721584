"""
Tests for the file-based pipeline: single stages, full runs, the sweep and
the run ledger.
"""

import json
import os
from datetime import date

import pytest

from crowdsense import database, db
from crowdsense.domain.Detection import SpecialDaySet
from crowdsense.domain.PipelineConfig import PipelineConfig
from crowdsense.exceptions import ConfigurationException, ValidationException
from crowdsense.service import pipeline_service, synth_service

pytestmark = pytest.mark.pipeline


@pytest.fixture
def posts_file(small_config, scenario_file, tmp_path):
    path = str(tmp_path / "synth" / "posts.csv")
    code, _ = pipeline_service.run_stage("synth", small_config, scenario_file, path, ledger=False)
    assert code == 0
    return path


@pytest.fixture
def full_run(small_config, scenario_file, tmp_path):
    out_dir = str(tmp_path / "run")
    code, summaries = pipeline_service.run_all(small_config, scenario_file, out_dir, ledger=False)
    return code, summaries, out_dir


class TestRunAll:
    """Test the full pipeline"""

    def test_every_stage_succeeds(self, full_run):
        """Test run_all writes every artifact and exits 0"""
        code, summaries, out_dir = full_run
        assert code == 0
        assert list(summaries) == ["synth"] + list(pipeline_service.PIPELINE_STAGES)
        for name in ("posts.csv", "specials.csv", "buckets.csv", "reps.csv", "sequences.csv", "traces.csv",
                     "ranking.json", "curves.csv", "metrics.json", "config.json", "ranking.json.summary.json"):
            assert os.path.exists(os.path.join(out_dir, name)), name

    def test_summaries(self, full_run):
        """Test stage summaries carry status and counts"""
        _, summaries, out_dir = full_run
        assert all(s["status"] == "ok" for s in summaries.values())
        assert summaries["synth"]["special_days"] == 2
        assert summaries["evaluate"]["specials"] == 2
        with open(os.path.join(out_dir, "config.json")) as f:
            assert json.load(f)["slot_minutes"] == 60

    def test_ranking_flags_specials(self, full_run):
        """Test the ranking marks the planted days"""
        _, _, out_dir = full_run
        with open(os.path.join(out_dir, "ranking.json")) as f:
            records = json.load(f)
        flagged = {r["date"] for r in records if r["is_special"]}
        assert flagged == {"2015-09-27", "2015-10-04"}
        assert min(r["date"] for r in records) == "2015-09-13"

    def test_deterministic(self, small_config, scenario_file, tmp_path, full_run):
        """Test a second run gives byte-identical ranking and curves"""
        _, _, first = full_run
        second = str(tmp_path / "again")
        code, _ = pipeline_service.run_all(small_config, scenario_file, second, ledger=False)
        assert code == 0
        for name in ("ranking.json", "curves.csv", "traces.csv"):
            with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
                assert a.read() == b.read(), name

    def test_posts_source_without_specials(self, small_config, posts_file, tmp_path):
        """Test a post file without special days stops after detection"""
        code, summaries = pipeline_service.run_all(small_config, posts_file, str(tmp_path / "plain"), ledger=False)
        assert code == 0
        assert "evaluate" not in summaries
        assert "detect" in summaries

    def test_is_scenario(self):
        """Test scenario sources are built-in names or JSON files"""
        assert pipeline_service.is_scenario("nyc-like")
        assert pipeline_service.is_scenario("my/scenario.JSON")
        assert not pipeline_service.is_scenario("posts.csv")


class TestRunStage:
    """Test single stages and their exit codes"""

    def test_missing_input(self, small_config, tmp_path):
        """Test a missing input file exits with 3"""
        code, summary = pipeline_service.run_stage("ingest", small_config, str(tmp_path / "nope.csv"),
                                                   str(tmp_path / "buckets.csv"), ledger=False)
        assert code == 3
        assert summary["error_code"] == "FILE_NOT_FOUND"
        assert os.path.exists(str(tmp_path / "buckets.csv.summary.json"))

    def test_warmup_longer_than_data(self, small_config, full_run, tmp_path):
        """Test a warm-up longer than the traces exits with 5"""
        _, _, out_dir = full_run
        code, summary = pipeline_service.run_stage("detect", small_config.overlay(warmup_days=100),
                                                   os.path.join(out_dir, "traces.csv"),
                                                   str(tmp_path / "late" / "ranking.json"), ledger=False)
        assert code == 5
        assert summary["error_code"] == "TRACE_TOO_SHORT"

    def test_evaluate_needs_specials(self, small_config, full_run, tmp_path):
        """Test evaluate without special days exits with 2"""
        _, _, out_dir = full_run
        code, _ = pipeline_service.run_stage("evaluate", small_config, os.path.join(out_dir, "ranking.json"),
                                             str(tmp_path / "curves.csv"), ledger=False)
        assert code == 2

    def test_evaluate_with_label_mismatch(self, small_config, full_run, tmp_path):
        """Test special days outside the scored range exit with 5"""
        _, _, out_dir = full_run
        specials = SpecialDaySet({date(2015, 9, 7): "early"})
        code, summary = pipeline_service.run_stage("evaluate", small_config, os.path.join(out_dir, "ranking.json"),
                                                   str(tmp_path / "curves.csv"), ledger=False, specials=specials)
        assert code == 5
        assert summary["error_code"] == "LABEL_MISMATCH"

    def test_unknown_stage(self, small_config, tmp_path):
        """Test unknown stage names are rejected"""
        with pytest.raises(ValidationException):
            pipeline_service.run_stage("plot", small_config, None, str(tmp_path / "x"), ledger=False)

    def test_study_stage(self, small_config, full_run, tmp_path):
        """Test the study stage writes one row per slot studied"""
        _, _, out_dir = full_run
        out = str(tmp_path / "study.csv")
        code, summary = pipeline_service.run_stage("study", small_config, os.path.join(out_dir, "buckets.csv"),
                                                   out, ledger=False, max_slots=6, runs=2)
        assert code == 0
        assert summary["slots"] == 6
        assert summary["reproducibility"]["runs"] == 2

    def test_symbolize_joint(self, small_config, full_run, tmp_path):
        """Test joint symbolization gives one sequence per weekday"""
        _, _, out_dir = full_run
        code, summary = pipeline_service.run_stage("symbolize", small_config.overlay(joint=True),
                                                   os.path.join(out_dir, "reps.csv"), str(tmp_path / "joint.csv"),
                                                   ledger=False)
        assert code == 0
        assert summary["sequences"] == 7
        assert summary["alphabet_size"] == 49 ** 2 + 1


class TestSweep:
    """Test the parameter sweep"""

    def test_comparison_table(self, small_config, posts_file, tmp_path):
        """Test one comparison row per combination"""
        specials = os.path.join(os.path.dirname(posts_file), "specials.csv")
        out_dir = str(tmp_path / "sweep")
        table = pipeline_service.sweep(small_config, posts_file, out_dir, specials, slot_minutes=[60], grids=[5],
                                       windows=[1, 2], estimators=["shannon", "hartley"])
        assert len(table) == 4
        assert set(table["status"]) == {"ok"}
        assert set(table["window_weeks"]) == {1, 2}
        assert os.path.exists(os.path.join(out_dir, "comparison.csv"))
        assert os.path.exists(os.path.join(out_dir, "s60_k2_L5_W1_shannon", "curves.csv"))


class TestConfig:
    """Test pipeline configuration"""

    def test_unknown_key(self):
        """Test unknown configuration keys are rejected"""
        with pytest.raises(ConfigurationException) as exc:
            PipelineConfig.from_dict({"slot_minutes": 15, "colour": "red"})
        assert exc.value.error_code == "UNKNOWN_CONFIG_KEY"

    @pytest.mark.parametrize("changes", [{"slot_minutes": 7}, {"k": 4}, {"L": 1}, {"estimator": "renyi"},
                                         {"warmup_days": -1}, {"joint": True, "k": 1}, {"eps_m": 0}])
    def test_invalid_values(self, changes):
        """Test invalid values raise ConfigurationException"""
        with pytest.raises(ConfigurationException):
            PipelineConfig(**changes)

    def test_json_round_trip(self, small_config, tmp_path):
        """Test a written config reads back equal"""
        path = str(tmp_path / "config.json")
        small_config.write(path)
        assert PipelineConfig.from_json(path) == small_config

    def test_overlay_keeps_other_values(self, small_config):
        """Test overlay changes only the given values"""
        changed = small_config.overlay(L=5, seed=None)
        assert changed.L == 5
        assert changed.seed == small_config.seed
        assert changed.slot_minutes == 60


class TestLedger:
    """Test stage runs recorded in the ledger"""

    def test_stage_is_recorded(self, small_config, scenario_file, tmp_path, test_db, monkeypatch):
        """Test a stage run with the ledger on adds a ledger row"""
        monkeypatch.setattr(database, "init_db", lambda: None)
        out = str(tmp_path / "posts.csv")
        code, _ = pipeline_service.run_stage("synth", small_config, scenario_file, out, ledger=True)
        assert code == 0
        (run,) = db.query_stage_runs("synth")
        view = db.run_summary(run)
        assert view["status"] == "ok"
        assert view["out_path"] == out
        assert view["config"]["slot_minutes"] == 60

    def test_failed_stage_is_recorded(self, small_config, tmp_path, test_db, monkeypatch):
        """Test a failed stage is recorded with its error code"""
        monkeypatch.setattr(database, "init_db", lambda: None)
        pipeline_service.run_stage("ingest", small_config, str(tmp_path / "nope.csv"), str(tmp_path / "b.csv"),
                                   ledger=True)
        (run,) = db.query_stage_runs("ingest")
        assert run.status == "error"
        assert run.exit_code == 3
        assert run.error_code == "FILE_NOT_FOUND"


@pytest.mark.slow
class TestAcceptance:
    """Test detection quality on the built-in half-year scenario"""

    def test_planted_days_rank_high(self, tmp_path):
        """Test at least 6 of 8 planted days rank in the top 20% of days"""
        config = PipelineConfig(slot_minutes=15, k=2, L=7, estimator="shannon", window_weeks=4,
                                score_method="endpoints")
        scenario = synth_service.nyc_like()
        path = str(tmp_path / "nyc-like.json")
        scenario.to_json(path)
        code, summaries = pipeline_service.run_all(config, path, str(tmp_path / "run"), ledger=False)
        assert code == 0
        assert summaries["evaluate"]["specials"] == 8
        metrics = summaries["evaluate"]
        assert metrics["detected_at_cut"] >= 6
        # 8 specials in a cut of ceil(0.2 * days) days: the rate cannot go below (cut - 8) / cut
        cut = metrics["cut_days"]
        assert metrics["false_positive_rate_at_cut"] == pytest.approx((cut - metrics["detected_at_cut"]) / cut)
        assert metrics["false_positive_rate_at_cut"] <= (cut - 6) / cut
        assert metrics["auc"] > 0.8
