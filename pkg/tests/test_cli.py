import csv
import json

import pytest

from fist.cli import main
from fist.harness import read_runlog


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture()
def synth_files(tmp_path):
    space = tmp_path / "space.json"
    table = tmp_path / "truth.csv"
    rc = run_cli(
        "synth",
        "--counts", "2,2,3,3",
        "--gamma", "0.5",
        "--beta", "0.5",
        "--seed", "3",
        "--out-space", space,
        "--out-table", table,
    )
    assert rc == 0
    return space, table


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSynth:
    def test_outputs_exist_and_parse(self, synth_files):
        space, table = synth_files
        doc = json.loads(space.read_text())
        assert len(doc["features"]) == 4
        rows = read_csv(table)
        assert rows[0] == ["f1", "f2", "f3", "f4", "obj1"]
        assert len(rows) - 1 == 36


class TestImportance:
    def test_importance_csv(self, synth_files, tmp_path):
        space, table = synth_files
        out = tmp_path / "imp.csv"
        assert run_cli("importance", "--space", space, "--data", table, "--out", out) == 0
        rows = read_csv(out)
        assert rows[0] == ["feature", "importance", "rank"]
        assert len(rows) == 5
        by_feature = {r[0]: (float(r[1]), int(r[2])) for r in rows[1:]}
        # gamma decay: f1 most important (rank 1)
        assert by_feature["f1"][1] == 1
        assert by_feature["f4"][1] == 4

    def test_worked_example(self, tmp_path):
        space = tmp_path / "space.json"
        space.write_text(
            '{"features": [{"name": "a", "options": ["0", "1"]},'
            ' {"name": "b", "options": ["0", "1"]}]}'
        )
        table = tmp_path / "t.csv"
        table.write_text("a,b,q\n0,0,1.0\n0,1,2.0\n1,0,3.0\n1,1,4.0\n")
        out = tmp_path / "imp.csv"
        assert run_cli("importance", "--space", space, "--data", table, "--out", out) == 0
        rows = read_csv(out)
        assert [r[1] for r in rows[1:]] == ["2.0", "0.5"]


class TestSigma:
    def test_true_importance_mode(self, synth_files, tmp_path):
        space, table = synth_files
        out = tmp_path / "sigma.csv"
        rc = run_cli(
            "sigma",
            "--space", space,
            "--data", table,
            "--true-importance",
            "--group-size", "4",
            "--trials", "200",
            "--seed", "0",
            "--out", out,
        )
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["objective", "sigma_random", "sigma_in_cluster", "sigma_cross_cluster"]
        vals = [float(v) for v in rows[1][1:]]
        assert vals[1] < vals[0]  # in-cluster below random


class TestTune:
    def test_table_run_writes_log(self, synth_files, tmp_path):
        space, table = synth_files
        out = tmp_path / "run.jsonl"
        rc = run_cli(
            "tune",
            "--space", space,
            "--strategy", "fist",
            "--budget", "14",
            "--initial", "4",
            "--theta", "4",
            "--seed", "5",
            "--objective", "obj1:min",
            "--table", table,
            "--prior-data", table,
            "--out", out,
        )
        assert rc == 0
        log = read_runlog(out)
        assert len(log.records) == 14
        assert log.config["strategy"] == "fist"

    def test_same_seed_identical_bytes(self, synth_files, tmp_path):
        space, table = synth_files
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            rc = run_cli(
                "tune",
                "--space", space,
                "--strategy", "baseline_rf",
                "--budget", "12",
                "--initial", "4",
                "--theta", "4",
                "--seed", "7",
                "--objective", "obj1",
                "--table", table,
                "--out", out,
            )
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_failing_evaluator_exits_3(self, synth_files, tmp_path):
        space, _ = synth_files
        out = tmp_path / "run.jsonl"
        rc = run_cli(
            "tune",
            "--space", space,
            "--strategy", "random",
            "--budget", "3",
            "--initial", "1",
            "--theta", "1",
            "--objective", "obj1",
            "--evaluator", "exit 7",
            "--out", out,
        )
        assert rc == 3
        log = read_runlog(out)
        assert all(not r.feasible for r in log.records)

    def test_unknown_strategy_exits_2(self, synth_files, tmp_path):
        space, table = synth_files
        rc = run_cli(
            "tune",
            "--space", space,
            "--strategy", "sorcery",
            "--budget", "12",
            "--objective", "obj1",
            "--table", table,
            "--out", tmp_path / "x.jsonl",
        )
        assert rc == 2

    def test_command_evaluator(self, synth_files, tmp_path):
        space, _ = synth_files
        out = tmp_path / "cmd.jsonl"
        rc = run_cli(
            "tune",
            "--space", space,
            "--strategy", "random",
            "--budget", "4",
            "--initial", "1",
            "--theta", "1",
            "--objective", "score:max",
            "--evaluator", 'echo "score=$FIST_PARAM_F1.5"',
            "--out", out,
        )
        assert rc == 0
        log = read_runlog(out)
        assert all(r.objectives["score"] in (0.5, 1.5) for r in log.records)


class TestMetrics:
    def test_metrics_rows(self, synth_files, tmp_path):
        space, table = synth_files
        log_path = tmp_path / "run.jsonl"
        run_cli(
            "tune",
            "--space", space,
            "--strategy", "random",
            "--budget", "10",
            "--initial", "3",
            "--theta", "3",
            "--seed", "1",
            "--objective", "obj1",
            "--table", table,
            "--out", log_path,
        )
        out = tmp_path / "metrics.csv"
        rc = run_cli(
            "metrics",
            "--space", space,
            "--truth", table,
            "--target-rank", "36",
            "--out", out,
            log_path,
        )
        assert rc == 0
        rows = read_csv(out)
        assert rows[0] == ["strategy", "budget", "seed", "best_rank", "cost_to_rank@36"]
        assert rows[1][0] == "random"
        assert int(rows[1][3]) >= 1


class TestBenchCli:
    def test_tiny_suite(self, tmp_path):
        out_dir = tmp_path / "suite"
        rc = run_cli(
            "bench",
            "--counts", "2,2,3,3",
            "--gamma", "0.5",
            "--beta", "0.5",
            "--seed", "3",
            "--strategies", "random,fist_rand_importance",
            "--budgets", "12",
            "--trials", "2",
            "--theta", "3",
            "--out-dir", out_dir,
        )
        assert rc == 0
        assert (out_dir / "metrics.csv").exists()
        assert (out_dir / "summary.csv").exists()
        assert (out_dir / "best_rank_vs_budget.png").exists()
        rows = read_csv(out_dir / "metrics.csv")
        assert len(rows) == 1 + 4  # header + 2 strategies x 2 trials
