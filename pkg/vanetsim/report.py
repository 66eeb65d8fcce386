"""Static SVG line charts and the report table of a sweep summary."""
import logging
from pathlib import Path
from typing import List, Sequence, Tuple

from vanetsim.errors import MetricsError
from vanetsim.metrics import ScenarioSummary, format_pct

LOG = logging.getLogger(__name__)

MARGIN_LEFT = 60
MARGIN_RIGHT = 20
MARGIN_TOP = 50
MARGIN_BOTTOM = 50
CHART_WIDTH = 500
CHART_HEIGHT = 250
Y_TICKS = (0, 20, 40, 60, 80, 100)

ADR_COLOR = "#4a90d9"
RD_COLOR = "#d98c4a"
PL_COLOR = "#d94a4a"

REPORT_HEADER = "n_vehicles,adr_pct,rd_pct,pl_pct"


def _fmt(value):
    return f"{value:.2f}"


def line_chart(title, x_label, y_label, xs: Sequence[float],
               series: Sequence[Tuple[str, Sequence, str]]) -> str:
    """
    One polyline per ``(name, values, color)``; ``None`` values are left out.
    The y axis is a fixed 0..100 percent scale.
    """
    if not xs:
        raise MetricsError("nothing to plot")
    width = MARGIN_LEFT + CHART_WIDTH + MARGIN_RIGHT
    height = MARGIN_TOP + CHART_HEIGHT + MARGIN_BOTTOM
    lo, hi = min(xs), max(xs)
    span = hi - lo or 1.0

    def px(x):
        return MARGIN_LEFT + (x - lo) / span * CHART_WIDTH

    def py(y):
        return MARGIN_TOP + CHART_HEIGHT * (1.0 - y / 100.0)

    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif">',
        f'  <rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'  <text x="{_fmt(width / 2)}" y="24" text-anchor="middle" font-size="16" '
        f'fill="#333">{title}</text>',
    ]
    for tick in Y_TICKS:
        y = _fmt(py(tick))
        svg.append(f'  <line x1="{MARGIN_LEFT}" y1="{y}" x2="{MARGIN_LEFT + CHART_WIDTH}" '
                   f'y2="{y}" stroke="#e0e0e0" stroke-width="1"/>')
        svg.append(f'  <text x="{MARGIN_LEFT - 8}" y="{y}" text-anchor="end" font-size="11" '
                   f'fill="#666">{tick}</text>')
    for x in xs:
        svg.append(f'  <text x="{_fmt(px(x))}" y="{MARGIN_TOP + CHART_HEIGHT + 18}" '
                   f'text-anchor="middle" font-size="11" fill="#333">{x:g}</text>')

    for i, (name, values, color) in enumerate(series):
        points = [(px(x), py(v)) for x, v in zip(xs, values) if v is not None]
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        svg.append(f'  <polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="2"/>')
        for x, y in points:
            svg.append(f'  <circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}"/>')
        legend_x = MARGIN_LEFT + 10 + 120 * i
        svg.append(f'  <rect x="{legend_x}" y="{MARGIN_TOP - 18}" width="12" height="12" '
                   f'fill="{color}"/>')
        svg.append(f'  <text x="{legend_x + 16}" y="{MARGIN_TOP - 8}" font-size="11" '
                   f'fill="#333">{name}</text>')

    axis_y = MARGIN_TOP + CHART_HEIGHT
    svg.extend([
        f'  <line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{axis_y}" '
        f'stroke="#333" stroke-width="1"/>',
        f'  <line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{MARGIN_LEFT + CHART_WIDTH}" '
        f'y2="{axis_y}" stroke="#333" stroke-width="1"/>',
        f'  <text x="{MARGIN_LEFT + CHART_WIDTH // 2}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12" fill="#666">{x_label}</text>',
        f'  <text x="15" y="{MARGIN_TOP + CHART_HEIGHT // 2}" text-anchor="middle" '
        f'font-size="12" fill="#666" '
        f'transform="rotate(-90, 15, {MARGIN_TOP + CHART_HEIGHT // 2})">{y_label}</text>',
        "</svg>",
    ])

    return "\n".join(svg) + "\n"


def adr_chart(rows: Sequence[ScenarioSummary]) -> str:
    xs = [r.n_vehicles for r in rows]
    return line_chart("Number of vehicles vs average delivery ratio", "Number of vehicles",
                      "ADR %", xs, [("ADR %", [r.adr_pct for r in rows], ADR_COLOR)])


def drop_chart(rows: Sequence[ScenarioSummary]) -> str:
    xs = [r.n_vehicles for r in rows]
    return line_chart("Number of vehicles vs router drop and packet loss", "Number of vehicles",
                      "%", xs, [("Router drop %", [r.rd_pct for r in rows], RD_COLOR),
                                ("Packet loss %", [r.pl_pct for r in rows], PL_COLOR)])


def report_csv(rows: Sequence[ScenarioSummary]) -> str:
    lines = [REPORT_HEADER]
    for r in rows:
        lines.append(",".join([str(r.n_vehicles), format_pct(r.adr_pct), format_pct(r.rd_pct),
                               format_pct(r.pl_pct)]))

    return "\n".join(lines) + "\n"


def write_report(rows: Sequence[ScenarioSummary], directory) -> List[Path]:
    if not rows:
        raise MetricsError("summary has no rows")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    outputs = {
        "adr.svg": adr_chart(rows),
        "rd_pl.svg": drop_chart(rows),
        "report.csv": report_csv(rows),
    }
    written = []
    for name, text in outputs.items():
        path = directory / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    LOG.info("report written to %s", directory)

    return written
