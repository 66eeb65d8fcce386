"""
Discrete-event core: couples mobility steps to the radio stack of every
vehicle on the road and produces the run's traces and counters.
"""
import bisect
import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from vanetsim.config import ScenarioConfig
from vanetsim.constants import DATA_TTL
from vanetsim.errors import ScenarioError
from vanetsim.events import Event, EventKind, EventQueue
from vanetsim.mac_dcf import Band, DcfMac, FrameKind, MacListener, Medium
from vanetsim.metrics import CounterSet, RunResult, check_conservation, run_csv, tally
from vanetsim.mobility import (TRACE_HEADER, RouteFile, TrafficWorld, TurnPolicy, parse_routes,
                               parse_turns)
from vanetsim.packet import Packet, PacketIds, PacketType, data_size
from vanetsim.road_network import Point2D, RoadNetwork, load_network
from vanetsim.routing_aodv import AodvAgent
from vanetsim.trace import EventTrace, PacketLedger
from vanetsim.traffic_app import (SENDER_SHARE, AppPacket, FlowSpec, emit_schedule,
                                  explicit_flows, select_flows)
from vanetsim.utils import format_float, step_digits

LOG = logging.getLogger(__name__)

__all__ = ["Event", "EventKind", "EventQueue", "NodeStack", "RngStreams", "ScenarioConfig",
           "ScenarioInputs", "Simulation", "StaticWorld", "TraceBundle", "build_flows",
           "run", "run_mobility", "validate_scenario"]


class RngStreams:
    """
    Named random substreams of one master seed. A stream depends only on
    ``(seed, name)``, so draws from one never shift another.
    """

    def __init__(self, seed):
        self.seed = seed
        self._streams: Dict[str, np.random.Generator] = {}

    @staticmethod
    def _key(name):
        return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")

    def stream(self, name) -> np.random.Generator:
        if name not in self._streams:
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self._key(name),))
            self._streams[name] = np.random.default_rng(seq)

        return self._streams[name]


class StaticWorld:
    """
    Nodes at fixed points, optionally leaving at given times. Stands in for
    a TrafficWorld in fixtures that need a known topology.
    """

    def __init__(self, positions: Mapping[str, Point2D], removals: Mapping[str, float] = None,
                 timestep=0.1):
        self.nodes = list(positions)
        self.timestep = timestep
        self.step_index = -1
        self.time = None
        self.removed = []
        self.trace_rows = []
        self.dead_ends = 0
        self.emergency_brakes = 0
        self.held_back = 0
        self.blocked_departures = 0
        self.cluster_mean = 0.0
        self._positions = dict(positions)
        self._removals = dict(removals or {})

    def step(self):
        self.step_index += 1
        self.time = self.step_index * self.timestep
        for node in sorted(self._removals):
            if node in self._positions and self._removals[node] <= self.time:
                del self._positions[node]
                self.removed.append((self.time, node))
        t = format_float(self.time, step_digits(self.timestep))
        for node in sorted(self._positions):
            p = self._positions[node]
            self.trace_rows.append((t, node, "", "0", format_float(0.0), format_float(0.0),
                                    format_float(p.x), format_float(p.y)))

    def positions(self):
        return dict(self._positions)


@dataclass(frozen=True)
class ScenarioInputs:
    network: RoadNetwork
    routes: RouteFile
    turns: Optional[TurnPolicy] = None


def _read(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {what} {path}: {exc.strerror}") from None


def validate_scenario(scenario: ScenarioConfig) -> ScenarioInputs:
    """Load and cross-check every input file; nothing is simulated."""
    if scenario.net is None:
        raise ScenarioError("scenario.net is not set")
    if scenario.routes is None:
        raise ScenarioError("scenario.routes is not set")
    if not Path(scenario.net).is_dir():
        raise ScenarioError(f"cannot read network {scenario.net}: not a directory")
    try:
        network = load_network(scenario.net)
    except OSError as exc:
        raise ScenarioError(f"cannot read network {scenario.net}: {exc.strerror}") from None

    path = scenario.routes_path
    routes = parse_routes(_read(path, "route file"), network, str(path))
    count = len(routes.vehicles)
    if scenario.n_vehicles is not None and scenario.n_vehicles != count:
        raise ScenarioError(f"scenario.n_vehicles is {scenario.n_vehicles} but {path} "
                            f"defines {count} vehicles")

    turns = None
    if scenario.turns is not None:
        turns = parse_turns(_read(scenario.turns, "turn table"), network, str(scenario.turns))
    elif any(v.uses_turn_policy for v in routes.vehicles):
        LOG.info("no turn table given, vehicles without a route turn uniformly")

    build_flows(scenario, [v.id for v in routes.vehicles], RngStreams(scenario.seed))

    return ScenarioInputs(network, routes, turns)


def build_flows(scenario: ScenarioConfig, vehicles: Sequence[str],
                streams: RngStreams) -> List[FlowSpec]:
    app = scenario.app
    try:
        if app.flows:
            return explicit_flows(app.flows, vehicles, app)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    if len(vehicles) < SENDER_SHARE:
        LOG.info("%d vehicles, no flows", len(vehicles))
        return []

    return select_flows(vehicles, streams.stream("flows"), app)


@dataclass
class TraceBundle:
    n_vehicles: int
    seed: int
    mobility_rows: List[tuple]
    events: str
    counters: CounterSet
    flows: List[FlowSpec]
    cluster_mean: float = 0.0
    warnings: Dict[str, int] = field(default_factory=dict)

    @property
    def mobility_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        writer.writerows(self.mobility_rows)

        return out.getvalue()

    @property
    def result(self):
        return RunResult(self.n_vehicles, self.seed, self.counters)

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "mobility.csv").write_text(self.mobility_csv, encoding="utf-8")
        (directory / "events.tr").write_text(self.events, encoding="utf-8")
        (directory / "counters.csv").write_text(run_csv([self.result]), encoding="utf-8")

        return directory


class NodeStack(MacListener):
    """MAC and AODV of one vehicle, wired to the shared trace and ledger."""

    def __init__(self, sim: "Simulation", node):
        self.sim = sim
        self.node = node
        self.active = True
        self.mac = DcfMac(node, sim.medium, sim.clock, sim.streams.stream("mac"),
                          sim.scenario.mac, self)
        self.agent = AodvAgent(node, sim.clock, sim.streams.stream("aodv"), self,
                               sim.scenario.aodv)

    @property
    def now(self):
        return self.sim.clock.now

    def _drop(self, packet, layer, reason):
        if packet.is_data:
            self.sim.ledger.dropped(packet, self.node, layer, reason)
        else:
            self.sim.trace.record(self.now, "d", self.node, layer, packet, reason)

    def leave(self):
        """The vehicle left the road: everything it still holds is lost."""
        self.active = False
        for frame in self.mac.shutdown():
            self._drop(frame.packet, "IFQ", "LNK")
        for packet in self.agent.shutdown():
            self._drop(packet, "RTR", "LNK")

    #
    # AODV host
    #
    def transmit(self, agent, packet, next_hop):
        if not self.active:
            self._drop(packet, "RTR", "LNK")
            return
        self.mac.send(packet, next_hop, Band.DATA if packet.is_data else Band.CONTROL)

    def deliver(self, agent, packet):
        ledger = self.sim.ledger
        if ledger.was_delivered(packet):
            ledger.released(packet)
            return
        self.sim.trace.record(self.now, "r", self.node, "AGT", packet)
        ledger.delivered(packet, self.node)

    def drop(self, agent, packet, reason):
        self._drop(packet, "RTR", reason)

    def trace(self, agent, action, packet):
        self.sim.trace.record(self.now, action, self.node, "RTR", packet)

    def new_packet_id(self):
        return self.sim.packet_ids.next()

    def purge_next_hop(self, agent, neighbor):
        for frame in self.mac.purge(lambda f: f.receiver == neighbor):
            self._drop(frame.packet, "IFQ", "LNK")

    #
    # MAC listener
    #
    def transmission_started(self, mac, frame):
        self.sim.trace.record(self.now, "s", self.node, "MAC", frame.packet)

    def frame_received(self, mac, frame):
        packet = frame.packet
        if frame.kind is FrameKind.ACK or packet is None:
            return
        if packet.is_data:
            if not self.sim.ledger.alive(packet):
                return
            self.sim.ledger.copied(packet, self.node)
        self.sim.trace.record(self.now, "r", self.node, "MAC", packet)
        self.agent.receive(packet, frame.sender)

    def frame_sent(self, mac, frame):
        if frame.packet.is_data and not frame.is_broadcast:
            self.sim.ledger.released(frame.packet)

    def frame_dropped(self, mac, frame, reason):
        if reason == "COL":
            if not frame.packet.is_data:
                self.sim.trace.record(self.now, "d", self.node, "MAC", frame.packet, reason)
            return
        self._drop(frame.packet, "IFQ" if reason == "IFQ" else "MAC", reason)

    def frame_failed(self, mac, frame):
        self.agent.handle_link_break(frame.receiver)


class Simulation:
    def __init__(self, scenario: ScenarioConfig, world, vehicles: Sequence[str],
                 streams: RngStreams = None):
        self.scenario = scenario
        self.world = world
        self.vehicles = list(vehicles)
        self.streams = streams or RngStreams(scenario.seed)
        self.clock = EventQueue()
        self.trace = EventTrace()
        self.ledger = PacketLedger(self.trace, self.clock)
        self.packet_ids = PacketIds()
        self.stacks: Dict[str, NodeStack] = {}
        self._positions: Dict[str, Point2D] = {}
        self.medium = Medium(scenario.phy, self.clock, lambda: self._positions)
        self.flows = build_flows(scenario, self.vehicles, self.streams)
        self._step_times: List[float] = []
        self._snapshots: List[Dict[str, Point2D]] = []
        self._removed_seen = 0
        self._flow_seq: Dict[int, int] = {}
        self.skipped_sends = 0

    @property
    def timestep(self):
        return self.scenario.mobility.timestep

    def position_of(self, node, time=None) -> Point2D:
        """Position at the latest mobility step not after ``time`` (default: now)."""
        time = self.clock.now if time is None else time
        i = bisect.bisect_right(self._step_times, time) - 1
        if i < 0 or node not in self._snapshots[i]:
            raise ScenarioError(f"{node} is not on the road at t={time}")

        return self._snapshots[i][node]

    #
    # mobility
    #
    def _mobility_step(self, k):
        self.world.step()
        for _time, node in self.world.removed[self._removed_seen:]:
            stack = self.stacks.pop(node, None)
            if stack is not None:
                LOG.debug("%s left at t=%.1f", node, self.clock.now)
                stack.leave()
        self._removed_seen = len(self.world.removed)

        self._positions = self.world.positions()
        self._step_times.append(self.clock.now)
        self._snapshots.append(self._positions)
        for node in self._positions:
            if node not in self.stacks:
                self.stacks[node] = NodeStack(self, node)

        next_time = (k + 1) * self.timestep
        if next_time < self.scenario.duration:
            self.clock.schedule(next_time, EventKind.MOBILITY_STEP,
                                lambda: self._mobility_step(k + 1), k + 1)

    #
    # application
    #
    def _schedule_send(self, flow, times, index):
        if index < len(times):
            self.clock.schedule(times[index], EventKind.APP_SEND,
                                lambda: self._app_send(flow, times, index), flow.flow_id)

    def _app_send(self, flow: FlowSpec, times, index):
        stack = self.stacks.get(flow.src)
        if stack is None:
            self.skipped_sends += 1
        else:
            uid = self.packet_ids.next()
            seq = self._flow_seq.get(flow.flow_id, 0)
            self._flow_seq[flow.flow_id] = seq + 1
            packet = Packet(uid, PacketType.CBR, flow.src, flow.dst, data_size(flow.packet_size),
                            DATA_TTL, AppPacket(uid, flow.flow_id, seq, self.clock.now),
                            flow.flow_id)
            self.trace.record(self.clock.now, "s", flow.src, "AGT", packet)
            self.ledger.created(packet, flow.src)
            stack.agent.send_data(packet)
        self._schedule_send(flow, times, index + 1)

    def run(self) -> TraceBundle:
        duration = self.scenario.duration
        LOG.info("run: %d vehicles, %d flows, seed %s, %.1f s", len(self.vehicles),
                 len(self.flows), self.scenario.seed, duration)
        self.clock.schedule(0.0, EventKind.MOBILITY_STEP, lambda: self._mobility_step(0), 0)
        for flow in self.flows:
            self._schedule_send(flow, emit_schedule(flow, duration), 0)
        self.clock.run_until(duration)
        ended = self.ledger.close()

        lines = self.trace.lines()
        counters = tally(lines, self.flows)
        violations = check_conservation(lines, self.flows)
        for message in violations:
            LOG.warning("conservation: %s", message)
        warnings = {
            "dead_ends": self.world.dead_ends,
            "emergency_brakes": self.world.emergency_brakes,
            "held_back": self.world.held_back,
            "blocked_departures": self.world.blocked_departures,
            "skipped_sends": self.skipped_sends,
            "conservation": len(violations),
        }
        LOG.info("run done after %d events: ps %d, pr %d, rd %d, %d packets still in flight",
                 self.clock.dispatched, counters.ps, counters.pr, counters.rd, ended)

        return TraceBundle(len(self.vehicles), self.scenario.seed, self.world.trace_rows,
                           self.trace.text(), counters, self.flows, self.world.cluster_mean,
                           warnings)


def _traffic_world(scenario: ScenarioConfig, inputs: ScenarioInputs, streams: RngStreams):
    return TrafficWorld(inputs.network, inputs.routes, scenario.mobility,
                        streams.stream("turns"), inputs.turns, scenario.signals_enabled)


def run(scenario: ScenarioConfig, world: StaticWorld = None) -> TraceBundle:
    """Simulate one scenario. ``world`` replaces the road traffic with fixed placements."""
    streams = RngStreams(scenario.seed)
    if world is None:
        inputs = validate_scenario(scenario)
        world = _traffic_world(scenario, inputs, streams)
        vehicles = [v.id for v in inputs.routes.vehicles]
    else:
        vehicles = world.nodes

    return Simulation(scenario, world, vehicles, streams).run()


def run_mobility(scenario: ScenarioConfig) -> TrafficWorld:
    """Vehicle movement alone, stepped through the whole duration."""
    inputs = validate_scenario(scenario)
    world = _traffic_world(scenario, inputs, RngStreams(scenario.seed))
    k = 0
    while k * scenario.mobility.timestep < scenario.duration:
        world.step()
        k += 1

    return world
