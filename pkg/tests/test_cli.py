import argparse
import os
from unittest.mock import call, patch

import pytest

from vanetsim.cli import int_list, main, run_directory
from vanetsim.errors import ScenarioError
from vanetsim.metrics import CounterSet, RunResult, read_runs, read_summary, run_csv
from vanetsim.road_network import load_network

SHORT_RUN = """\
scenario.net = net
scenario.routes = routes_{n}.xml
scenario.n_vehicles = 4
scenario.duration_s = 20
app.start_s = 2
"""


@pytest.fixture
def grid_dir(tmp_path):
    directory = tmp_path / "grid"
    assert main(["grid", "--out", str(directory), "--counts", "4 8"]) == 0
    (directory / "short.cfg").write_text(SHORT_RUN, encoding="utf-8")
    return directory


@pytest.fixture
def fake_job():
    def _job(config, overrides, n, seed, out):
        return RunResult(n, seed, CounterSet(ps=100, pr=90 - seed, rd=2))

    with patch("vanetsim.cli.sweep_job", side_effect=_job) as job:
        yield job


@pytest.fixture(autouse=True)
def one_worker(monkeypatch):
    monkeypatch.delenv("VANETSIM_WORKERS", raising=False)


#
# Arguments
#
def test_int_list():
    assert int_list("10, 20 30") == [10, 20, 30]


@pytest.mark.parametrize("text", ["ten", "", " , "])
def test_int_list_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        int_list(text)


@pytest.mark.parametrize("argv", [
    ["run", "--out", "x"],
    ["sweep", "--out", "x"],
    ["report", "--out", "x"],
    ["fly"],
])
def test_usage_errors_exit_with_two(argv):
    with pytest.raises(SystemExit) as exc_info:
        main(argv)

    assert exc_info.value.code == 2


#
# Single scenarios
#
def test_grid_writes_a_scenario(grid_dir):
    assert sorted(p.name for p in grid_dir.iterdir()) == [
        "net", "routes_4.xml", "routes_8.xml", "scenario.cfg", "short.cfg"]


@pytest.mark.parametrize("extra, box", [
    ([], (800.0, 800.0)),
    (["--block-length", "400"], (1600.0, 1600.0)),
])
def test_grid_block_length(tmp_path, extra, box):
    directory = tmp_path / "grid"

    assert main(["grid", "--out", str(directory), "--counts", "4", *extra]) == 0

    assert load_network(directory / "net").bounding_box == box


def test_validate(grid_dir, capsys):
    status = main(["validate", "--config", str(grid_dir / "short.cfg")])

    assert status == 0
    assert capsys.readouterr().out == "ok: 21 nodes, 48 edges, 9 signal programs, 4 vehicles\n"


def test_validate_reports_errors(grid_dir, caplog):
    status = main(["validate", "--config", str(grid_dir / "scenario.cfg")])

    assert status == 1
    assert "n_vehicles" in caplog.text


def test_run(grid_dir, tmp_path, capsys):
    out = tmp_path / "run"

    status = main(["run", "--config", str(grid_dir / "short.cfg"), "--seed", "4",
                   "--out", str(out)])

    assert status == 0
    assert capsys.readouterr().out.startswith(f"{out}: ps=")
    result = read_runs((out / "counters.csv").read_text())[0]
    assert (result.n_vehicles, result.seed) == (4, 4)
    assert (out / "events.tr").is_file() and (out / "mobility.csv").is_file()


def test_run_with_flags_instead_of_a_config(grid_dir, tmp_path):
    status = main(["run", "--net", str(grid_dir / "net"), "--routes",
                   str(grid_dir / "routes_4.xml"), "--out", str(tmp_path / "run")])

    assert status == 0


#
# Sweeps
#
class TestSweep:
    def sweep(self, grid_dir, out, *extra):
        return main(["sweep", "--config", str(grid_dir / "short.cfg"), "--counts", "4,8",
                     "--seeds", "2,4", "--workers", "1", "--out", str(out), *extra])

    def test_summary_rows(self, grid_dir, tmp_path, fake_job):
        out = tmp_path / "sweep"

        assert self.sweep(grid_dir, out) == 0

        assert fake_job.call_count == 4
        rows = read_summary((out / "summary.csv").read_text())
        assert [r.n_vehicles for r in rows] == [4, 8]
        assert rows[0].seeds == (2, 4)
        assert rows[0].adr_pct == pytest.approx(87.0)
        assert len(read_runs((out / "runs.csv").read_text())) == 4

    def test_resume_skips_finished_runs(self, grid_dir, tmp_path, fake_job):
        out = tmp_path / "sweep"
        done = run_directory(out, 4, 2)
        done.mkdir(parents=True)
        (done / "counters.csv").write_text(run_csv([RunResult(4, 2, CounterSet(50, 50, 0))]))

        assert self.sweep(grid_dir, out, "--resume") == 0

        assert [c.args[2:4] for c in fake_job.call_args_list] == [(4, 4), (8, 2), (8, 4)]
        runs = read_runs((out / "runs.csv").read_text())
        assert (runs[0].seed, runs[0].counters.ps) == (2, 50)

    def test_without_resume_everything_reruns(self, grid_dir, tmp_path, fake_job):
        out = tmp_path / "sweep"
        done = run_directory(out, 4, 2)
        done.mkdir(parents=True)
        (done / "counters.csv").write_text(run_csv([RunResult(4, 2, CounterSet(50, 50, 0))]))

        self.sweep(grid_dir, out)

        assert fake_job.call_count == 4

    def test_failed_run_marks_the_row(self, grid_dir, tmp_path):
        out = tmp_path / "sweep"

        def job(config, overrides, n, seed, out):
            if (n, seed) == (8, 4):
                raise ScenarioError("broken route file")
            return RunResult(n, seed, CounterSet(100, 90, 2))

        with patch("vanetsim.cli.sweep_job", side_effect=job) as mock_job:
            status = self.sweep(grid_dir, out)

        assert status == 1
        assert call(str(grid_dir / "short.cfg"), mock_job.call_args.args[1], 8, 4, out) \
            in mock_job.call_args_list
        rows = read_summary((out / "summary.csv").read_text())
        assert rows[1].flags == ("incomplete", "single-seed")

    def test_unexpected_error_in_one_run_keeps_the_sweep_going(self, grid_dir, tmp_path, caplog):
        out = tmp_path / "sweep"

        def job(config, overrides, n, seed, out):
            if (n, seed) == (4, 2):
                raise RuntimeError("stack exhausted")
            return RunResult(n, seed, CounterSet(100, 90, 2))

        with patch("vanetsim.cli.sweep_job", side_effect=job) as mock_job:
            status = self.sweep(grid_dir, out)

        assert status == 1
        assert mock_job.call_count == 4
        assert "n=4 seed=2 failed: stack exhausted" in caplog.text
        rows = read_summary((out / "summary.csv").read_text())
        assert [r.n_vehicles for r in rows] == [4, 8]
        assert rows[0].flags == ("incomplete", "single-seed")
        assert rows[1].flags == ()

    @pytest.mark.skipif(not os.environ.get("VANETSIM_SLOW"), reason="runs real simulations")
    def test_real_sweep(self, grid_dir, tmp_path):
        out = tmp_path / "sweep"

        assert self.sweep(grid_dir, out) == 0

        assert (run_directory(out, 8, 4) / "events.tr").is_file()
        rows = read_summary((out / "summary.csv").read_text())
        assert all(r.flags == () or r.flags == ("undefined",) for r in rows)


def test_report(tmp_path, capsys):
    summary = tmp_path / "summary.csv"
    summary.write_text("n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n"
                       "10,87.68,3.00,12.32,2 4 6 8 10\n"
                       "20,80.00,4.00,20.00,2 4 6 8 10\n")

    status = main(["report", "--summary", str(summary), "--out", str(tmp_path / "report")])

    assert status == 0
    assert capsys.readouterr().out.split() == [
        str(tmp_path / "report" / name) for name in ("adr.svg", "rd_pl.svg", "report.csv")]


def test_report_on_a_missing_summary(tmp_path):
    assert main(["report", "--summary", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path)]) == 1
