import json
import os
from pathlib import Path

import pytest

from precis.cli import main, read_csv

GOLDEN_TRACE = Path(__file__).parent / "data" / "micro_trace_golden.csv"


def run_cli(*argv):
    return main(list(argv))


class TestProfile:
    def test_blackscholes_all_single(self, tmp_path, capsys):
        assert run_cli("profile", "--kernel", "blackscholes",
                       "--out", str(tmp_path)) == 0
        meta, rows = read_csv(str(tmp_path / "profile_summary.csv"))
        assert meta["kernel"] == "blackscholes"
        assert float(rows[0]["single_ratio"]) == 1.0
        assert rows[0]["top_scopes"].split(";")[0] == "cndf"

    def test_particlefilter_double_dominant(self, tmp_path):
        assert run_cli("profile", "--kernel", "particlefilter_mini",
                       "--out", str(tmp_path)) == 0
        _, rows = read_csv(str(tmp_path / "profile_summary.csv"))
        assert float(rows[0]["double_ratio"]) > 0.5

    def test_unknown_kernel_is_usage_error(self, tmp_path, capsys):
        assert run_cli("profile", "--kernel", "nope", "--out", str(tmp_path)) == 1
        assert "unknown kernel" in capsys.readouterr().err


class TestRun:
    def test_identity_error_zero(self, tmp_path):
        assert run_cli("run", "--kernel", "kmeans", "--rule", "wp",
                       "--genome", "24", "--out", str(tmp_path)) == 0
        _, rows = read_csv(str(tmp_path / "run.csv"))
        assert float(rows[0]["error_pct"]) == 0.0
        assert float(rows[0]["fpu_norm"]) == 100.0

    def test_trace_golden(self, tmp_path):
        assert run_cli("run", "--kernel", "micro", "--rule", "wp",
                       "--genome", "24", "--trace", "--out", str(tmp_path)) == 0
        got = (tmp_path / "trace.csv").read_bytes()
        assert got == GOLDEN_TRACE.read_bytes()

    def test_no_trace_flag_no_file(self, tmp_path):
        assert run_cli("run", "--kernel", "micro", "--rule", "wp",
                       "--genome", "24", "--out", str(tmp_path)) == 0
        assert not (tmp_path / "trace.csv").exists()

    def test_invalid_genome(self, tmp_path, capsys):
        assert run_cli("run", "--kernel", "kmeans", "--rule", "wp",
                       "--genome", "99", "--out", str(tmp_path)) == 1

    def test_genome_length_mismatch(self, tmp_path):
        assert run_cli("run", "--kernel", "kmeans", "--rule", "cip",
                       "--genome", "8;9", "--targets", "distance",
                       "--out", str(tmp_path)) == 1


class TestExplore:
    def test_wp_exhaustive_is_24_evals(self, tmp_path):
        assert run_cli("explore", "--kernel", "blackscholes", "--rule", "wp",
                       "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        _, rows = read_csv(str(tmp_path / "eval_log.csv"))
        assert len(rows) == 24

    def test_wp_exhaustive_double_is_53_evals(self, tmp_path):
        assert run_cli("explore", "--kernel", "particlefilter_mini", "--rule",
                       "wp", "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        _, rows = read_csv(str(tmp_path / "eval_log.csv"))
        assert len(rows) == 53

    def test_cip_default_targets_at_most_ten(self, tmp_path):
        assert run_cli("explore", "--kernel", "radar", "--rule", "cip",
                       "--alphabet", "12,24", "--population", "8",
                       "--generations", "3", "--budget", "24",
                       "--out", str(tmp_path)) == 0
        meta, _ = read_csv(str(tmp_path / "eval_log.csv"))
        assert 1 <= len(meta["targets"].split(";")) <= 10

    def test_seed_reproducibility(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli("explore", "--kernel", "kmeans", "--rule", "cip",
                           "--alphabet", "8,16,24", "--population", "6",
                           "--generations", "3", "--budget", "18",
                           "--seed", "42", "--out", str(out)) == 0
        assert (a / "eval_log.csv").read_bytes() == (b / "eval_log.csv").read_bytes()
        assert (a / "frontier.csv").read_bytes() == (b / "frontier.csv").read_bytes()

    def test_budget_violation_fails_before_eval(self, tmp_path, capsys):
        assert run_cli("explore", "--kernel", "kmeans", "--rule", "wp",
                       "--population", "50", "--generations", "10",
                       "--budget", "400", "--out", str(tmp_path)) == 1
        assert not (tmp_path / "eval_log.csv").exists()

    def test_savings_csv_schema(self, tmp_path):
        assert run_cli("explore", "--kernel", "micro", "--rule", "wp",
                       "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        _, rows = read_csv(str(tmp_path / "savings.csv"))
        assert [float(r["threshold_pct"]) for r in rows] == [1.0, 5.0, 10.0]

    def test_manifest_roundtrip(self, tmp_path):
        assert run_cli("explore", "--kernel", "micro", "--rule", "wp",
                       "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["kernel"] == "micro"
        assert manifest["mode"] == "exhaustive"
        # the resolved manifest re-runs identically
        again = tmp_path / "again"
        assert run_cli("explore", "--manifest", str(tmp_path / "manifest.json"),
                       "--out", str(again)) == 0
        assert (again / "eval_log.csv").read_bytes() == (
            tmp_path / "eval_log.csv"
        ).read_bytes()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PRECIS_SEED", "77")
        assert run_cli("explore", "--kernel", "micro", "--rule", "wp",
                       "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 77


class TestRobustness:
    def _frontier(self, tmp_path):
        out = tmp_path / "explore"
        assert run_cli("explore", "--kernel", "kmeans", "--rule", "wp",
                       "--mode", "exhaustive", "--alphabet",
                       "6,8,10,12,16,20,24", "--out", str(out)) == 0
        return out / "frontier.csv"

    def test_self_fit(self, tmp_path):
        frontier = self._frontier(tmp_path)
        out = tmp_path / "rb"
        assert run_cli("robustness", "--frontier", str(frontier),
                       "--train-seed", "5", "--test-seed", "5",
                       "--train-count", "2", "--test-count", "2",
                       "--out", str(out)) == 0
        _, rows = read_csv(str(out / "robustness.csv"))
        by_metric = {r["metric"]: r for r in rows}
        assert float(by_metric["error"]["r"]) == 1.0
        assert float(by_metric["fpu_energy"]["r"]) == 1.0

    def test_disjoint_sets_reported_in_range(self, tmp_path):
        frontier = self._frontier(tmp_path)
        out = tmp_path / "rb"
        assert run_cli("robustness", "--frontier", str(frontier),
                       "--train-count", "2", "--test-count", "3",
                       "--out", str(out)) == 0
        _, rows = read_csv(str(out / "robustness.csv"))
        for row in rows:
            assert -1.0 <= float(row["r"]) <= 1.0

    def test_single_config_warns_nonzero(self, tmp_path, capsys):
        out = tmp_path / "explore"
        assert run_cli("explore", "--kernel", "micro", "--rule", "wp",
                       "--mode", "exhaustive", "--alphabet", "24",
                       "--out", str(out)) == 0
        assert run_cli("robustness", "--frontier", str(out / "frontier.csv"),
                       "--out", str(tmp_path / "rb")) == 1

    def test_corrupted_header_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("config_id,genome\n0,24\n")
        assert run_cli("robustness", "--frontier", str(bad),
                       "--out", str(tmp_path / "rb")) == 1


class TestCsvFormat:
    def test_version_header_everywhere(self, tmp_path):
        assert run_cli("explore", "--kernel", "micro", "--rule", "wp",
                       "--mode", "exhaustive", "--out", str(tmp_path)) == 0
        for name in ("eval_log.csv", "frontier.csv", "savings.csv"):
            first = (tmp_path / name).read_text().splitlines()[0]
            assert first == "# precis-csv v1"

    def test_read_csv_rejects_missing_version(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        from precis.cli import UsageError
        with pytest.raises(UsageError):
            read_csv(str(p))
