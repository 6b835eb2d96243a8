import csv

import pytest

from hdbo.cli import main


def read_rows(path):
    with open(path, encoding="utf-8") as handle:
        return list(csv.reader(handle))


def run_args(out_dir, **overrides):
    options = {
        "problem": "branin",
        "D": "8",
        "d": "2",
        "method": "random",
        "budget": "15",
        "init": "5",
        "seeds": "2",
        "out": str(out_dir),
    }
    options.update(overrides)
    argv = ["run"]
    for key, value in options.items():
        argv.extend([f"--{key}", value])
    return argv


class TestRunCommand:
    def test_writes_csvs_and_summary_line(self, tmp_path, capsys):
        assert main(run_args(tmp_path)) == 0
        captured = capsys.readouterr()
        assert "final mean regret" in captured.out
        assert "wrote" in captured.out
        assert len(read_rows(tmp_path / "runs.csv")) == 1 + 2 * 15
        assert len(read_rows(tmp_path / "summary.csv")) == 1 + 15

    def test_quick_profile_overrides_budget_and_seeds(self, tmp_path):
        argv = run_args(tmp_path, budget="500", seeds="20") + ["--quick"]
        assert main(argv) == 0
        rows = read_rows(tmp_path / "runs.csv")
        assert len(rows) == 1 + 5 * 200
        seeds = {row[4] for row in rows[1:]}
        assert seeds == {"0", "1", "2", "3", "4"}

    def test_failed_cell_exits_one(self, tmp_path, capsys):
        argv = run_args(tmp_path, method="full-gp-ucb", D="250", seeds="1")
        assert main(argv) == 1
        assert "FAILED" in capsys.readouterr().err

    def test_bad_seed_list_exits_two(self, tmp_path, capsys):
        argv = run_args(tmp_path, seeds="1,1")
        assert main(argv) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_method_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(run_args(tmp_path, method="cartesian"))

    def test_repeated_invocation_is_bit_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        first.mkdir()
        second.mkdir()
        argv = run_args(first, method="sir-bo", D="12", d="2", budget="25", init="8")
        assert main(argv) == 0
        argv = run_args(second, method="sir-bo", D="12", d="2", budget="25", init="8")
        assert main(argv) == 0
        for name in ("runs.csv", "summary.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestSuiteCommand:
    def write_spec(self, tmp_path, text):
        path = tmp_path / "suite.txt"
        path.write_text(text, encoding="utf-8")
        return path

    def test_runs_all_cells(self, tmp_path, capsys):
        spec = self.write_spec(
            tmp_path,
            "problem=branin method=random D=8 d=2 budget=12 init=4 seeds=0,1\n"
            "problem=trimodal method=random D=8 d=2 budget=12 init=4 seeds=1\n",
        )
        out = tmp_path / "out"
        out.mkdir()
        assert main(["suite", "--spec", str(spec), "--out", str(out)]) == 0
        assert len(read_rows(out / "runs.csv")) == 1 + 2 * 12 + 12
        assert len(read_rows(out / "summary.csv")) == 1 + 2 * 12
        assert capsys.readouterr().out.count("final mean regret") == 2

    def test_quick_rescales_every_cell(self, tmp_path):
        spec = self.write_spec(
            tmp_path,
            "problem=branin method=random D=8 d=2 budget=500 init=50 seeds=20\n",
        )
        out = tmp_path / "out"
        out.mkdir()
        argv = ["suite", "--spec", str(spec), "--out", str(out), "--quick"]
        assert main(argv) == 0
        assert len(read_rows(out / "summary.csv")) == 1 + 200

    def test_malformed_spec_exits_two(self, tmp_path, capsys):
        spec = self.write_spec(tmp_path, "problem=branin method=random D=8\n")
        assert main(["suite", "--spec", str(spec), "--out", str(tmp_path)]) == 2
        assert "missing required key" in capsys.readouterr().err

    def test_missing_spec_file_exits_two(self, tmp_path, capsys):
        missing = tmp_path / "nope.txt"
        assert main(["suite", "--spec", str(missing), "--out", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err
