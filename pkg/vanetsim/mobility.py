"""
Microscopic vehicle movement on a RoadNetwork.

Vehicles follow the Krauss safe-speed rule without driver imperfection,
accelerate and brake within their type's bounds, stop at red (and, when
they still can, at yellow) signals and pick the next edge either from an
explicit route or from a turn probability table.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Tuple

from vanetsim.constants import VEHICLE_TYPES
from vanetsim.errors import NetworkFormatError
from vanetsim.road_network import RoadNetwork, SignalState, parse_xml
from vanetsim.utils import distance, format_float, step_digits, verify_positive

LOG = logging.getLogger(__name__)

CLUSTER_RADIUS_M = 50.0
TRACE_HEADER = ("time", "vehicle", "edge", "lane", "pos", "speed", "x", "y")
PROBABILITY_TOLERANCE = 1e-6
EPSILON = 1e-9


@dataclass(frozen=True)
class VehicleType:
    id: str
    accel: float
    decel: float
    length: float
    max_speed: float

    def __post_init__(self):
        for name in ("accel", "decel", "length", "max_speed"):
            verify_positive(f"{self.id}.{name}", getattr(self, name))

    @classmethod
    def preset(cls, type_id):
        return cls(type_id, *VEHICLE_TYPES[type_id])


@dataclass(frozen=True)
class MobilityConfig:
    timestep: float = 0.1
    tau: float = 1.0
    min_gap: float = 2.5

    def __post_init__(self):
        verify_positive("timestep", self.timestep)
        verify_positive("tau", self.tau)
        verify_positive("min_gap", self.min_gap)


@dataclass(frozen=True)
class Route:
    id: str
    edges: Tuple[str, ...]


@dataclass(frozen=True)
class VehicleDemand:
    """One `<vehicle>` of a route file: what to spawn, where and when."""

    id: str
    vtype: str
    depart: float
    route: Optional[str] = None
    start_edge: Optional[str] = None
    depart_lane: Optional[int] = None

    @property
    def uses_turn_policy(self):
        return self.route is None


@dataclass(frozen=True)
class RouteFile:
    vtypes: Mapping[str, VehicleType]
    routes: Mapping[str, Route]
    vehicles: Tuple[VehicleDemand, ...]

    @property
    def max_depart(self):
        return max((v.depart for v in self.vehicles), default=0.0)


@dataclass(frozen=True)
class TurnPolicy:
    """
    Probability of each outgoing connection, keyed by the incoming edge.
    An incoming edge identifies the intersection it ends at.
    """

    table: Mapping[str, Tuple[Tuple[str, float], ...]]

    def choices(self, from_edge):
        return self.table.get(from_edge, ())

    @classmethod
    def uniform(cls, network: RoadNetwork):
        table = {}
        for edge_id in network.edges:
            outgoing = network.outgoing(edge_id)
            if outgoing:
                p = 1.0 / len(outgoing)
                table[edge_id] = tuple((c.to_edge, p) for c in outgoing)

        return cls(table)


@dataclass(frozen=True)
class VehicleState:
    id: str
    vtype: VehicleType
    edge: str
    lane: int
    pos: float
    speed: float
    route: Optional[Tuple[str, ...]] = None
    cursor: int = 0
    next_edge: Optional[str] = None

    @property
    def rear(self):
        return self.pos - self.vtype.length


@dataclass(frozen=True)
class StepContext:
    """What a vehicle sees ahead of it during one step."""

    lane_speed_limit: float
    leader_gap: float = math.inf
    leader_speed: float = 0.0
    signal: SignalState = SignalState.GREEN
    stop_distance: float = math.inf
    next_speed_limit: float = math.inf
    tau: float = 1.0
    min_gap: float = 2.5


#
# Kinematics
#
def safe_speed(gap, leader_speed, decel, tau):
    """Krauss safe speed: the fastest speed that still allows stopping behind the leader."""
    b = decel
    v = -b * tau + math.sqrt(b * b * tau * tau + leader_speed * leader_speed + 2 * b * max(gap, 0.0))

    return max(v, 0.0)


def must_stop(state: VehicleState, ctx: StepContext, dt):
    if ctx.signal is SignalState.RED:
        return True
    if ctx.signal is SignalState.YELLOW:
        gap = ctx.stop_distance - ctx.min_gap
        return state.speed - state.vtype.decel * dt <= safe_speed(gap, 0.0, state.vtype.decel, dt)

    return False


def step_vehicle(state: VehicleState, ctx: StepContext, dt) -> VehicleState:
    vtype = state.vtype
    v = state.speed
    stop = must_stop(state, ctx, dt)

    wanted = min(v + vtype.accel * dt, vtype.max_speed, ctx.lane_speed_limit)
    if math.isfinite(ctx.leader_gap):
        wanted = min(wanted, safe_speed(ctx.leader_gap - ctx.min_gap, ctx.leader_speed,
                                        vtype.decel, ctx.tau))
    if stop:
        wanted = min(wanted, safe_speed(ctx.stop_distance - ctx.min_gap, 0.0, vtype.decel, ctx.tau))
    if ctx.next_speed_limit < wanted and math.isfinite(ctx.stop_distance):
        wanted = min(wanted, safe_speed(ctx.stop_distance, ctx.next_speed_limit, vtype.decel, dt))

    floor = max(v - vtype.decel * dt, 0.0)
    speed = max(wanted, floor)
    if speed > ctx.next_speed_limit and speed * dt >= ctx.stop_distance:
        speed = max(ctx.next_speed_limit, floor)

    # the leader's tail and a stop line that must be obeyed bound the move,
    # never the speed
    room = math.inf
    if math.isfinite(ctx.leader_gap):
        room = max(ctx.leader_gap, 0.0)
    if stop:
        room = min(room, max(ctx.stop_distance, 0.0))

    pos = state.pos + min(speed * dt, room)

    return replace(state, speed=speed, pos=pos)


def choose_next_edge(state: VehicleState, policy: Optional[TurnPolicy], rng) -> Optional[str]:
    """Next edge at the end of ``state.edge``; None means the vehicle leaves the network."""
    if state.route is not None:
        nxt = state.cursor + 1
        return state.route[nxt] if nxt < len(state.route) else None

    choices = policy.choices(state.edge) if policy is not None else ()
    if not choices:
        return None
    if len(choices) == 1:
        return choices[0][0]
    u = rng.random()
    acc = 0.0
    for to_edge, p in choices:
        acc += p
        if u < acc:
            return to_edge

    return choices[-1][0]


#
# Route and turn documents
#
def _vtype_from(el, source):
    attrs = ("accel", "decel", "length", "maxSpeed")
    type_id = el.require("id", source)
    try:
        return VehicleType(type_id, *(el.number(a, source) for a in attrs))
    except ValueError as exc:
        if isinstance(exc, NetworkFormatError):
            raise
        raise NetworkFormatError(str(exc), source, el.line) from None


def _check_route(edges, network, source, line):
    for edge_id in edges:
        if edge_id not in network.edges:
            raise NetworkFormatError(f"route references unknown edge {edge_id!r}", source, line)
    for a, b in zip(edges, edges[1:]):
        try:
            network.connection(a, b)
        except ValueError:
            raise NetworkFormatError(f"route has no connection {a}->{b}", source, line) from None


def parse_routes(text, network: RoadNetwork, source="<routes>") -> RouteFile:
    root = parse_xml(text, source, "routes")
    vtypes, routes, vehicles = {}, {}, []
    seen = set()
    for el in root.children if root is not None else []:
        if el.tag == "vType":
            vtype = _vtype_from(el, source)
            vtypes[vtype.id] = vtype
        elif el.tag == "route":
            route_id = el.require("id", source)
            edges = tuple(el.require("edges", source).split())
            if not edges:
                raise NetworkFormatError(f"route {route_id!r} is empty", source, el.line)
            _check_route(edges, network, source, el.line)
            routes[route_id] = Route(route_id, edges)
        elif el.tag == "vehicle":
            vehicles.append(_vehicle_from(el, network, vtypes, routes, source))
            if vehicles[-1].id in seen:
                raise NetworkFormatError(f"duplicate vehicle id {vehicles[-1].id!r}", source, el.line)
            seen.add(vehicles[-1].id)
        else:
            raise NetworkFormatError(f"unexpected <{el.tag}> inside <routes>", source, el.line)

    return RouteFile(vtypes, routes, tuple(vehicles))


def _vehicle_from(el, network, vtypes, routes, source):
    vehicle_id = el.require("id", source)
    type_id = el.require("type", source)
    if type_id not in vtypes:
        if type_id not in VEHICLE_TYPES:
            raise NetworkFormatError(f"vehicle {vehicle_id!r} has unknown type {type_id!r}",
                                     source, el.line)
        vtypes[type_id] = VehicleType.preset(type_id)
    depart = el.number("depart", source)
    if depart < 0:
        raise NetworkFormatError(f"vehicle {vehicle_id!r} departs before 0", source, el.line)

    if el.attrs.get("mode") == "turnpolicy":
        first = el.require("start", source)
        if first not in network.edges:
            raise NetworkFormatError(f"vehicle {vehicle_id!r} starts on unknown edge {first!r}",
                                     source, el.line)
        route_id = None
    else:
        route_id = el.require("route", source)
        if route_id not in routes:
            raise NetworkFormatError(f"vehicle {vehicle_id!r} uses unknown route {route_id!r}",
                                     source, el.line)
        first = routes[route_id].edges[0]

    lane = None
    if "departLane" in el.attrs:
        lane = el.number("departLane", source, kind=int)
        if not 0 <= lane < network.edges[first].num_lanes:
            raise NetworkFormatError(f"vehicle {vehicle_id!r} departLane {lane} does not exist",
                                     source, el.line)

    return VehicleDemand(vehicle_id, type_id, depart, route_id,
                         first if route_id is None else None, lane)


def parse_turns(text, network: RoadNetwork, source="<turns>") -> TurnPolicy:
    table = dict(TurnPolicy.uniform(network).table)
    explicit: Dict[str, List[Tuple[str, float]]] = {}
    lines = {}
    root = parse_xml(text, source, "turns")
    for el in root.children if root is not None else []:
        if el.tag != "turn":
            raise NetworkFormatError(f"unexpected <{el.tag}> inside <turns>", source, el.line)
        pair = el.require("from", source), el.require("to", source)
        try:
            network.connection(*pair)
        except (KeyError, ValueError):
            raise NetworkFormatError(f"no connection {pair[0]}->{pair[1]}", source, el.line) from None
        p = el.number("probability", source)
        if not 0 <= p <= 1:
            raise NetworkFormatError(f"probability {p} outside [0, 1]", source, el.line)
        explicit.setdefault(pair[0], []).append((pair[1], p))
        lines.setdefault(pair[0], el.line)

    for from_edge, entries in explicit.items():
        total = sum(p for _, p in entries)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise NetworkFormatError(
                f"turn probabilities from {from_edge!r} sum to {total}, not 1",
                source, lines[from_edge])
        table[from_edge] = tuple(entries)

    return TurnPolicy(table)


#
# World
#
class TrafficWorld:
    """
    All vehicles of one run. Each ``step()`` advances the clock by one
    timestep: existing vehicles move (leaders first), pending departures
    spawn, then positions are recorded.
    """

    def __init__(self, network: RoadNetwork, routes: RouteFile, config: MobilityConfig,
                 rng, turns: Optional[TurnPolicy] = None, signals_enabled=True):
        self.network = network
        self.routes = routes
        self.config = config
        self.turns = turns if turns is not None else TurnPolicy.uniform(network)
        self.signals_enabled = signals_enabled
        self._rng = rng

        self.step_index = -1
        self.time = None
        self.vehicles: Dict[str, VehicleState] = {}
        self.removed: List[Tuple[float, str]] = []
        self.trace_rows: List[Tuple[str, ...]] = []
        self.dead_ends = 0
        self.emergency_brakes = 0
        self.held_back = 0
        self.blocked_departures = 0
        self._lanes = {(e.id, i): [] for e in network.edges.values() for i in range(e.num_lanes)}
        self._pending = sorted(routes.vehicles, key=lambda v: v.depart)
        self._signal_positions = [n.position for n in network.traffic_light_nodes()]
        self._cluster_total = 0

    @property
    def cluster_mean(self):
        """Mean number of vehicles within 50 m of a traffic light per step."""
        steps = self.step_index + 1
        return self._cluster_total / steps if steps > 0 else 0.0

    def step(self):
        self.step_index += 1
        self.time = self.step_index * self.config.timestep
        if self.step_index > 0:
            self._move_all()
        self.process_departures(self.time)
        self._record()

    def positions(self):
        return {vid: self.network.position_along(s.edge, s.pos) for vid, s in self.vehicles.items()}

    def _signal(self, from_edge, to_edge):
        if not self.signals_enabled:
            return SignalState.GREEN

        return self.network.signal_state(from_edge, to_edge, self.time)

    def _lane_key(self, edge_id, lane):
        return edge_id, min(lane, self.network.edges[edge_id].num_lanes - 1)

    def _context(self, state, lane_list, index):
        edge = self.network.edges[state.edge]
        ctx = dict(lane_speed_limit=edge.speed_limit, tau=self.config.tau,
                   min_gap=self.config.min_gap)
        if state.next_edge is not None:
            ctx.update(signal=self._signal(state.edge, state.next_edge),
                       stop_distance=edge.length - state.pos,
                       next_speed_limit=self.network.edges[state.next_edge].speed_limit)

        leader, gap = None, math.inf
        if index > 0:
            leader = self.vehicles[lane_list[index - 1]]
            gap = leader.rear - state.pos
        elif state.next_edge is not None and not must_stop(state, StepContext(**ctx),
                                                           self.config.timestep):
            # a vehicle held at the stop line never reaches the next edge's tail
            ahead = self._lanes[self._lane_key(state.next_edge, state.lane)]
            if ahead:
                leader = self.vehicles[ahead[-1]]
                gap = edge.length - state.pos + leader.rear
        if leader is not None:
            ctx.update(leader_gap=gap, leader_speed=leader.speed)

        return StepContext(**ctx)

    def _move_all(self):
        dt = self.config.timestep
        order = [vid for lane_list in self._lanes.values() for vid in lane_list]
        for vid in order:
            state = self.vehicles[vid]
            key = (state.edge, state.lane)
            lane_list = self._lanes[key]
            new = step_vehicle(state, self._context(state, lane_list, lane_list.index(vid)), dt)
            if new.speed < state.speed - state.vtype.decel * dt - EPSILON:
                self.emergency_brakes += 1
                LOG.debug("%s braked beyond its bound at t=%.1f: %.2f -> %.2f m/s",
                          vid, self.time, state.speed, new.speed)
            if new.pos - state.pos < new.speed * dt - EPSILON:
                self.held_back += 1
                LOG.debug("%s held back at t=%.1f: %.2f m of room at %.2f m/s",
                          vid, self.time, new.pos - state.pos, new.speed)

            length = self.network.edges[state.edge].length
            if new.next_edge is None and new.pos >= length:
                self._remove(vid, lane_list)
            elif new.pos > length:
                lane_list.remove(vid)
                self._enter(new, new.next_edge, new.pos - length)
            else:
                self.vehicles[vid] = new

    def _remove(self, vid, lane_list):
        state = self.vehicles.pop(vid)
        lane_list.remove(vid)
        self.removed.append((self.time, vid))
        if state.route is None:
            self.dead_ends += 1
            LOG.warning("%s reached dead end %s and left the network", vid, state.edge)

    def _enter(self, state, edge_id, pos, lane=None):
        edge = self.network.edges[edge_id]
        key = self._lane_key(edge_id, state.lane if lane is None else lane)
        state = replace(state, edge=edge_id, lane=key[1], pos=min(pos, edge.length),
                        cursor=state.cursor + 1)
        state = replace(state, next_edge=choose_next_edge(state, self.turns, self._rng))
        self.vehicles[state.id] = state
        self._lanes[key].append(state.id)

        return state

    def _entrance_space(self, key):
        lane_list = self._lanes[key]
        return self.vehicles[lane_list[-1]].rear if lane_list else math.inf

    def process_departures(self, clock) -> List[VehicleState]:
        """Spawn every pending vehicle whose depart time has come and whose entrance is free."""
        spawned, waiting = [], []
        for demand in self._pending:
            if demand.depart > clock + EPSILON:
                waiting.append(demand)
                continue
            vtype = self.routes.vtypes[demand.vtype]
            if demand.uses_turn_policy:
                edge_id, route = demand.start_edge, None
            else:
                route = self.routes.routes[demand.route].edges
                edge_id = route[0]
            lanes = range(self.network.edges[edge_id].num_lanes)
            if demand.depart_lane is not None:
                lane = demand.depart_lane
            else:
                lane = max(lanes, key=lambda i: (self._entrance_space((edge_id, i)), -i))
            if self._entrance_space((edge_id, lane)) < vtype.length + self.config.min_gap:
                self.blocked_departures += 1
                LOG.debug("departure of %s delayed at t=%.1f: entrance blocked", demand.id, clock)
                waiting.append(demand)
                continue
            state = VehicleState(demand.id, vtype, edge_id, lane, 0.0, 0.0, route, cursor=-1)
            spawned.append(self._enter(state, edge_id, 0.0, lane=lane))
        self._pending = waiting

        return spawned

    def _record(self):
        t = format_float(self.time, step_digits(self.config.timestep))
        for vid in sorted(self.vehicles):
            s = self.vehicles[vid]
            p = self.network.position_along(s.edge, s.pos)
            self.trace_rows.append((t, vid, s.edge, str(s.lane), format_float(s.pos),
                                    format_float(s.speed), format_float(p.x), format_float(p.y)))
        if self._signal_positions:
            positions = self.positions().values()
            self._cluster_total += sum(
                1 for p in positions
                if any(distance(p, q) <= CLUSTER_RADIUS_M for q in self._signal_positions))

