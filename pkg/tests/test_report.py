import re

import pytest

from vanetsim.errors import MetricsError
from vanetsim.metrics import ScenarioSummary
from vanetsim.report import adr_chart, drop_chart, line_chart, report_csv, write_report

COUNTS = (10, 20, 30, 40, 50, 60, 70)


@pytest.fixture
def rows():
    return [ScenarioSummary(n, (2, 4, 6, 8, 10), None, None, 95.0 - n / 2, n / 10, 5.0 + n / 2)
            for n in COUNTS]


def polylines(svg):
    return re.findall(r'<polyline points="([^"]*)"', svg)


def test_adr_chart_has_one_point_per_count(rows):
    svg = adr_chart(rows)

    (points,) = polylines(svg)
    assert len(points.split()) == 7
    assert svg.startswith("<svg") and svg.endswith("</svg>\n")
    assert "Number of vehicles vs average delivery ratio" in svg


def test_drop_chart_draws_two_series(rows):
    svg = drop_chart(rows)

    assert [len(p.split()) for p in polylines(svg)] == [7, 7]
    assert "Router drop %" in svg and "Packet loss %" in svg


def test_chart_is_deterministic(rows):
    assert adr_chart(rows) == adr_chart(list(rows))


def test_missing_values_are_left_out():
    svg = line_chart("t", "x", "y", [10, 20, 30], [("s", [50.0, None, 70.0], "#000")])

    assert polylines(svg) == ["60.00,175.00 560.00,125.00"]
    assert svg.count("<circle") == 2


def test_nothing_to_plot():
    with pytest.raises(MetricsError):
        line_chart("t", "x", "y", [], [])


def test_report_csv_leaves_undefined_cells_empty():
    rows = [ScenarioSummary(10, (2,), None, None, 87.684, 3.0, 12.316),
            ScenarioSummary(20, (), None, None, None, None, None, ("undefined",))]

    assert report_csv(rows) == "n_vehicles,adr_pct,rd_pct,pl_pct\n10,87.68,3.00,12.32\n20,,,\n"


def test_write_report(rows, tmp_path):
    written = write_report(rows, tmp_path / "report")

    assert [p.name for p in written] == ["adr.svg", "rd_pl.svg", "report.csv"]
    assert all(p.is_file() for p in written)
    assert (tmp_path / "report" / "report.csv").read_text().count("\n") == 8


def test_write_report_needs_rows(tmp_path):
    with pytest.raises(MetricsError):
        write_report([], tmp_path)
