"""
Packet accounting over a finished event trace, and the sweep statistics:
average delivery ratio, router drop % and packet loss %.
"""
import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from vanetsim.constants import SEEDS
from vanetsim.errors import MetricsError
from vanetsim.packet import PacketType
from vanetsim.trace import TraceRecord, parse_line

LOG = logging.getLogger(__name__)

RUN_HEADER = ("n_vehicles", "seed", "ps", "pr", "rd", "pl")
SUMMARY_HEADER = ("n_vehicles", "adr_pct", "rd_pct", "pl_pct", "seeds")
NOT_ROUTER_DROPS = ("END",)


@dataclass
class CounterSet:
    ps: int = 0
    pr: int = 0
    rd: int = 0
    drops_by_reason: Dict[str, int] = field(default_factory=dict)

    @property
    def pl(self):
        return self.ps - self.pr


@dataclass(frozen=True)
class RunResult:
    n_vehicles: int
    seed: int
    counters: CounterSet


@dataclass(frozen=True)
class FlowBalance:
    flow_id: int
    sent: int
    received: int
    drops: Dict[str, int]

    @property
    def balanced(self):
        return self.sent == self.received + sum(self.drops.values())


@dataclass(frozen=True)
class ScenarioSummary:
    n_vehicles: int
    seeds: Tuple[int, ...]
    apr: Optional[float]
    aps: Optional[float]
    adr_pct: Optional[float]
    rd_pct: Optional[float]
    pl_pct: Optional[float]
    flags: Tuple[str, ...] = ()

    @property
    def incomplete(self):
        return "incomplete" in self.flags


def _records(trace) -> Iterable[TraceRecord]:
    for number, item in enumerate(trace, start=1):
        if isinstance(item, TraceRecord):
            yield item
        elif item.strip():
            yield parse_line(item, number)


class _Ledger:
    """Data packets of a trace grouped by the flow that sent them."""

    def __init__(self, trace, flows):
        self.by_src = {f.src: f for f in flows}
        self.sent: Dict[int, object] = {}
        self.received = set()
        self.drops: List[TraceRecord] = []
        self.ps = 0
        data = PacketType.CBR.value
        for rec in _records(trace):
            if rec.pkt_type != data:
                continue
            if rec.layer == "AGT" and rec.action == "s" and rec.node in self.by_src:
                self.sent[rec.pkt_id] = self.by_src[rec.node]
                self.ps += 1
            elif rec.layer == "AGT" and rec.action == "r":
                flow = self.sent.get(rec.pkt_id)
                if flow is not None and rec.node == flow.dst:
                    self.received.add(rec.pkt_id)
            elif rec.action == "d":
                self.drops.append(rec)


def tally(trace, flows) -> CounterSet:
    """Counters of one run; ``trace`` holds trace lines or parsed records."""
    ledger = _Ledger(trace, flows)
    counters = CounterSet(ps=ledger.ps, pr=len(ledger.received))
    reasons = Counter()
    for rec in ledger.drops:
        reasons[rec.reason] += 1
        flow = ledger.sent.get(rec.pkt_id)
        if flow is None or rec.reason in NOT_ROUTER_DROPS:
            continue
        if rec.node not in (flow.src, flow.dst):
            counters.rd += 1
    counters.drops_by_reason = dict(sorted(reasons.items()))

    return counters


def flow_balance(trace, flows) -> Dict[int, FlowBalance]:
    ledger = _Ledger(trace, flows)
    sent, received = Counter(), Counter()
    drops = {f.flow_id: Counter() for f in flows}
    for uid, flow in ledger.sent.items():
        sent[flow.flow_id] += 1
        if uid in ledger.received:
            received[flow.flow_id] += 1
    for rec in ledger.drops:
        flow = ledger.sent.get(rec.pkt_id)
        if flow is not None:
            drops[flow.flow_id][rec.reason] += 1

    return {f.flow_id: FlowBalance(f.flow_id, sent[f.flow_id], received[f.flow_id],
                                   dict(drops[f.flow_id]))
            for f in flows}


def check_conservation(trace, flows) -> List[str]:
    """One message per flow whose sends are not matched by receives plus drops."""
    problems = []
    for balance in flow_balance(trace, flows).values():
        if not balance.balanced:
            problems.append(f"flow {balance.flow_id}: sent {balance.sent}, received "
                            f"{balance.received}, dropped {sum(balance.drops.values())}")

    return problems


#
# Statistics over seeds
#
def _counters(runs):
    counters = [r.counters if isinstance(r, RunResult) else r for r in runs]
    if not counters:
        raise MetricsError("no runs to average")

    return counters


def _ratios(runs, numerator):
    counters = _counters(runs)
    if any(c.ps == 0 for c in counters):
        raise MetricsError("a run sent no packets")

    return np.array([numerator(c) / c.ps for c in counters], dtype=float)


def adr(runs) -> Tuple[float, float, float]:
    """``(apr, aps, adr_pct)``: the ratio of the mean received to the mean sent."""
    counters = _counters(runs)
    apr = float(np.mean([c.pr for c in counters]))
    aps = float(np.mean([c.ps for c in counters]))
    if aps == 0:
        raise MetricsError("average packets sent is zero")

    return apr, aps, 100.0 * apr / aps


def rd_pct(runs) -> float:
    return 100.0 * float(np.mean(_ratios(runs, lambda c: c.rd)))


def pl_pct(runs) -> float:
    return 100.0 * float(np.mean(_ratios(runs, lambda c: c.pl)))


def summarize_sweep(results: Mapping[int, Sequence[RunResult]],
                    expected_seeds: Sequence[int] = SEEDS) -> List[ScenarioSummary]:
    rows = []
    for n in sorted(results):
        runs = sorted(results[n], key=lambda r: r.seed)
        seeds = tuple(r.seed for r in runs)
        flags = []
        if set(expected_seeds) - set(seeds):
            flags.append("incomplete")
        if len(seeds) == 1:
            flags.append("single-seed")
        try:
            apr, aps, adr_value = adr(runs)
            rd_value, pl_value = rd_pct(runs), pl_pct(runs)
        except MetricsError as exc:
            LOG.warning("%d vehicles: %s", n, exc)
            apr = aps = adr_value = rd_value = pl_value = None
            flags.append("undefined")
        rows.append(ScenarioSummary(n, seeds, apr, aps, adr_value, rd_value, pl_value,
                                    tuple(flags)))

    return rows


#
# CSV
#
def format_pct(value):
    return "" if value is None else f"{value:.2f}"


def _writer():
    out = io.StringIO()
    return out, csv.writer(out, lineterminator="\n")


def run_csv(results: Iterable[RunResult]) -> str:
    out, writer = _writer()
    writer.writerow(RUN_HEADER)
    for r in results:
        c = r.counters
        writer.writerow((r.n_vehicles, r.seed, c.ps, c.pr, c.rd, c.pl))

    return out.getvalue()


def summary_csv(rows: Iterable[ScenarioSummary]) -> str:
    out, writer = _writer()
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        seeds = " ".join(str(s) for s in row.seeds)
        if row.flags:
            seeds += " " + " ".join(f"[{flag}]" for flag in row.flags)
        writer.writerow((row.n_vehicles, format_pct(row.adr_pct), format_pct(row.rd_pct),
                         format_pct(row.pl_pct), seeds))

    return out.getvalue()


def _rows(text, header, what):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise MetricsError(f"{what} is empty") from None
    if tuple(first) != header:
        raise MetricsError(f"{what} header is {','.join(first)!r}, expected {','.join(header)!r}")

    return [(number, row) for number, row in enumerate(reader, start=2) if row]


def read_runs(text) -> List[RunResult]:
    results = []
    for number, row in _rows(text, RUN_HEADER, "run table"):
        try:
            n, seed, ps, pr, rd, _pl = (int(v) for v in row)
        except ValueError:
            raise MetricsError(f"run table line {number}: expected six integers") from None
        results.append(RunResult(n, seed, CounterSet(ps, pr, rd)))

    return results


def _optional_float(text):
    return float(text) if text else None


def read_summary(text) -> List[ScenarioSummary]:
    rows = []
    for number, row in _rows(text, SUMMARY_HEADER, "summary"):
        try:
            n, adr_text, rd_text, pl_text, seeds_text = row
            tokens = seeds_text.split()
            seeds = tuple(int(t) for t in tokens if not t.startswith("["))
            flags = tuple(t.strip("[]") for t in tokens if t.startswith("["))
            rows.append(ScenarioSummary(int(n), seeds, None, None, _optional_float(adr_text),
                                        _optional_float(rd_text), _optional_float(pl_text),
                                        flags))
        except ValueError:
            raise MetricsError(f"summary line {number} is malformed") from None
    if not rows:
        raise MetricsError("summary has no rows")

    return rows
