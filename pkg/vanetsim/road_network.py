"""
Road graph: nodes, directed multi-lane edges, allowed connections and
fixed-time signal programs at traffic-light intersections.

Networks are read from a small XML subset (one document each for nodes,
edges, connections and, optionally, signal programs). Every semantic
error is reported with the document name and line number.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple
from xml.etree import ElementTree as ET
from xml.parsers import expat

from vanetsim.errors import NetworkFormatError
from vanetsim.utils import axis_of, axis_separation, distance, heading, turn_angle

LOG = logging.getLogger(__name__)

STRAIGHT_LIMIT_DEG = 30.0
TURN_LIMIT_DEG = 150.0
DEFAULT_GREEN_S = 30.0
DEFAULT_YELLOW_S = 3.0
AXIS_GROUP_TOLERANCE_DEG = 45.0

NETWORK_FILES = ("nodes.xml", "edges.xml", "connections.xml", "signals.xml")


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


class NodeKind(str, Enum):
    PRIORITY = "priority"
    TRAFFIC_LIGHT = "traffic_light"


class Direction(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    STRAIGHT = "straight"


class SignalState(str, Enum):
    GREEN = "G"
    YELLOW = "Y"
    RED = "r"


_STATE_CHARS = {
    "G": SignalState.GREEN,
    "g": SignalState.GREEN,
    "Y": SignalState.YELLOW,
    "y": SignalState.YELLOW,
    "r": SignalState.RED,
    "R": SignalState.RED,
}


@dataclass(frozen=True)
class NodeSpec:
    id: str
    position: Point2D
    kind: NodeKind = NodeKind.PRIORITY


@dataclass(frozen=True)
class EdgeSpec:
    id: str
    from_node: str
    to_node: str
    num_lanes: int
    speed_limit: float
    priority: float
    length: float


@dataclass(frozen=True)
class Connection:
    from_edge: str
    to_edge: str
    direction: Direction


@dataclass(frozen=True)
class Phase:
    duration: float
    states: Tuple[SignalState, ...]

    @property
    def state_string(self):
        return "".join(s.value for s in self.states)


@dataclass(frozen=True)
class SignalProgram:
    """
    A fixed-time cycle over the connections of one node.

    ``states`` of every phase index the node's connections in the order
    they were listed in the connections document.
    """

    node: str
    phases: Tuple[Phase, ...]
    cycle_offset: float = 0.0

    @property
    def cycle(self):
        return sum(p.duration for p in self.phases)

    def phase_at(self, time):
        t = (time + self.cycle_offset) % self.cycle
        for phase in self.phases:
            if t < phase.duration:
                return phase
            t -= phase.duration

        return self.phases[-1]

    def state_at(self, connection_index, time):
        return self.phase_at(time).states[connection_index]


@dataclass(frozen=True)
class RoadNetwork:
    nodes: Mapping[str, NodeSpec]
    edges: Mapping[str, EdgeSpec]
    connections: Tuple[Connection, ...] = ()
    signals: Mapping[str, SignalProgram] = field(default_factory=dict)
    _outgoing: Dict[str, Tuple[Connection, ...]] = field(
        init=False, repr=False, compare=False, default_factory=dict)
    _at_node: Dict[str, Tuple[Connection, ...]] = field(
        init=False, repr=False, compare=False, default_factory=dict)
    _index: Dict[Tuple[str, str], int] = field(
        init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        outgoing = {}
        at_node = {}
        for conn in self.connections:
            outgoing.setdefault(conn.from_edge, []).append(conn)
            node = self.edges[conn.from_edge].to_node
            members = at_node.setdefault(node, [])
            self._index[(conn.from_edge, conn.to_edge)] = len(members)
            members.append(conn)
        self._outgoing.update({k: tuple(v) for k, v in outgoing.items()})
        self._at_node.update({k: tuple(v) for k, v in at_node.items()})

    @property
    def bounding_box(self):
        if not self.nodes:
            return (0.0, 0.0)
        xs = [n.position.x for n in self.nodes.values()]
        ys = [n.position.y for n in self.nodes.values()]

        return (max(xs) - min(xs), max(ys) - min(ys))

    def outgoing(self, edge_id):
        return self._outgoing.get(edge_id, ())

    def node_connections(self, node_id):
        return self._at_node.get(node_id, ())

    def connection(self, from_edge, to_edge):
        index = self._index.get((from_edge, to_edge))
        if index is None:
            raise ValueError(f"no connection from {from_edge!r} to {to_edge!r}")
        node = self.edges[from_edge].to_node

        return self._at_node[node][index]

    def connection_index(self, from_edge, to_edge):
        self.connection(from_edge, to_edge)

        return self._index[(from_edge, to_edge)]

    def signal_state(self, from_edge, to_edge, time):
        node = self.edges[from_edge].to_node
        program = self.signals.get(node)
        if program is None:
            return SignalState.GREEN

        return program.state_at(self.connection_index(from_edge, to_edge), time)

    def edge_heading(self, edge_id):
        edge = self.edges[edge_id]

        return heading(self.nodes[edge.from_node].position,
                       self.nodes[edge.to_node].position)

    def position_along(self, edge_id, pos):
        edge = self.edges[edge_id]
        start = self.nodes[edge.from_node].position
        end = self.nodes[edge.to_node].position
        f = min(max(pos / edge.length, 0.0), 1.0)

        return Point2D(start.x + f * (end.x - start.x), start.y + f * (end.y - start.y))

    def traffic_light_nodes(self):
        return [n for n in self.nodes.values() if n.kind is NodeKind.TRAFFIC_LIGHT]


@dataclass(frozen=True)
class NetworkDocuments:
    nodes: str
    edges: str
    connections: str
    signals: Optional[str] = None


#
# Geometry
#
def translate_origin(points: Sequence[Point2D], offset: Tuple[float, float]):
    """Shift points to a new origin: X = x + h, Y = y + k."""
    h, k = offset

    return [Point2D(p.x + h, p.y + k) for p in points]


def _direction(angle):
    if abs(angle) <= STRAIGHT_LIMIT_DEG:
        return Direction.STRAIGHT
    if STRAIGHT_LIMIT_DEG < angle <= TURN_LIMIT_DEG:
        return Direction.LEFT
    if -TURN_LIMIT_DEG <= angle < -STRAIGHT_LIMIT_DEG:
        return Direction.RIGHT
    # U-turn: crosses the opposing lanes like a left turn
    return Direction.LEFT


def _turn_between(nodes, edges, from_edge, to_edge):
    a, b = edges[from_edge], edges[to_edge]
    h_in = heading(nodes[a.from_node].position, nodes[a.to_node].position)
    h_out = heading(nodes[b.from_node].position, nodes[b.to_node].position)

    return _direction(turn_angle(h_in, h_out))


def classify_turn(network: RoadNetwork, from_edge: str, to_edge: str) -> Direction:
    network.connection(from_edge, to_edge)

    return _turn_between(network.nodes, network.edges, from_edge, to_edge)


def bounding_area(network: RoadNetwork) -> float:
    if not network.nodes:
        raise ValueError("bounding area of an empty network is undefined")
    width, height = network.bounding_box

    return width * height


#
# Signals
#
def default_signal_program(network: RoadNetwork, node: str,
                           green: float = DEFAULT_GREEN_S,
                           yellow: float = DEFAULT_YELLOW_S) -> SignalProgram:
    """
    Two-group fixed-time program: approaches sharing the axis of the first
    approach go green together, the remaining approaches form the second
    group. Each group gets green then yellow while the other is red.
    """
    spec = network.nodes.get(node)
    if spec is None or spec.kind is not NodeKind.TRAFFIC_LIGHT:
        raise ValueError(f"node {node!r} is not a traffic light")

    conns = network.node_connections(node)
    approaches = list(dict.fromkeys(c.from_edge for c in conns))
    in_first_group = set()
    if approaches:
        reference = axis_of(network.edge_heading(approaches[0]))
        for edge_id in approaches:
            axis = axis_of(network.edge_heading(edge_id))
            if axis_separation(axis, reference) <= AXIS_GROUP_TOLERANCE_DEG:
                in_first_group.add(edge_id)

    def states(first, second):
        return tuple(first if c.from_edge in in_first_group else second for c in conns)

    G, Y, R = SignalState.GREEN, SignalState.YELLOW, SignalState.RED
    phases = (
        Phase(green, states(G, R)),
        Phase(yellow, states(Y, R)),
        Phase(green, states(R, G)),
        Phase(yellow, states(R, Y)),
    )

    return SignalProgram(node, phases)


def _check_program(program, network, source, line):
    conns = network.node_connections(program.node)
    if not program.phases:
        raise NetworkFormatError(f"program for {program.node!r} has no phases", source, line)
    for phase in program.phases:
        if not phase.duration > 0:
            raise NetworkFormatError(
                f"phase duration must be positive, got {phase.duration}", source, line)
        if len(phase.states) != len(conns):
            raise NetworkFormatError(
                f"program for {program.node!r} has {len(phase.states)} states per phase, "
                f"node has {len(conns)} connections", source, line)
    for i, conn in enumerate(conns):
        if not any(p.states[i] is SignalState.GREEN for p in program.phases):
            raise NetworkFormatError(
                f"connection {conn.from_edge}->{conn.to_edge} is never green", source, line)


#
# XML
#
@dataclass
class XmlElement:
    tag: str
    attrs: Dict[str, str]
    line: int
    children: list = field(default_factory=list)

    def require(self, name, source):
        try:
            return self.attrs[name]
        except KeyError:
            raise NetworkFormatError(
                f"<{self.tag}> is missing attribute {name!r}", source, self.line) from None

    def number(self, name, source, default=None, kind=float):
        if name not in self.attrs and default is not None:
            return default
        raw = self.require(name, source)
        try:
            value = kind(raw)
        except ValueError:
            raise NetworkFormatError(
                f"attribute {name}={raw!r} of <{self.tag}> is not a number",
                source, self.line) from None
        if isinstance(value, float) and not math.isfinite(value):
            raise NetworkFormatError(f"attribute {name} must be finite", source, self.line)

        return value


def parse_xml(text, source="<string>", root_tag=None):
    """Parse an XML document into XmlElement nodes; blank text yields None."""
    if text is None or not text.strip():
        return None

    parser = expat.ParserCreate()
    roots, stack = [], []

    def start(tag, attrs):
        element = XmlElement(tag, dict(attrs), parser.CurrentLineNumber)
        (stack[-1].children if stack else roots).append(element)
        stack.append(element)

    def end(_tag):
        stack.pop()

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        parser.Parse(text, True)
    except expat.ExpatError as exc:
        raise NetworkFormatError(expat.ErrorString(exc.code), source, exc.lineno) from None

    root = roots[0]
    if root_tag is not None and root.tag != root_tag:
        raise NetworkFormatError(f"expected <{root_tag}>, found <{root.tag}>", source, root.line)

    return root


def _children(root, tag, source):
    if root is None:
        return []
    for child in root.children:
        if child.tag != tag:
            raise NetworkFormatError(
                f"unexpected <{child.tag}> inside <{root.tag}>", source, child.line)

    return root.children


def _parse_nodes(text, source):
    nodes = {}
    for el in _children(parse_xml(text, source, "nodes"), "node", source):
        node_id = el.require("id", source)
        if node_id in nodes:
            raise NetworkFormatError(f"duplicate node id {node_id!r}", source, el.line)
        kind_text = el.attrs.get("type", NodeKind.PRIORITY.value)
        try:
            kind = NodeKind(kind_text)
        except ValueError:
            raise NetworkFormatError(
                f"node {node_id!r} has unknown type {kind_text!r}", source, el.line) from None
        position = Point2D(el.number("x", source), el.number("y", source))
        nodes[node_id] = NodeSpec(node_id, position, kind)

    return nodes


def _parse_edges(text, source, nodes):
    edges = {}
    for el in _children(parse_xml(text, source, "edges"), "edge", source):
        edge_id = el.require("id", source)
        if edge_id in edges:
            raise NetworkFormatError(f"duplicate edge id {edge_id!r}", source, el.line)
        ends = el.require("from", source), el.require("to", source)
        for node_id in ends:
            if node_id not in nodes:
                raise NetworkFormatError(
                    f"edge {edge_id!r} references unknown node {node_id!r}", source, el.line)
        if ends[0] == ends[1]:
            raise NetworkFormatError(f"edge {edge_id!r} is a self-loop", source, el.line)
        length = distance(nodes[ends[0]].position, nodes[ends[1]].position)
        if not length > 0:
            raise NetworkFormatError(f"edge {edge_id!r} has zero length", source, el.line)
        lanes = el.number("numLanes", source, default=1, kind=int)
        speed = el.number("speed", source)
        priority = el.number("priority", source, default=0.0)
        if lanes < 1:
            raise NetworkFormatError(f"edge {edge_id!r} needs at least one lane", source, el.line)
        if not speed > 0:
            raise NetworkFormatError(f"edge {edge_id!r} speed must be positive", source, el.line)
        if not 0 <= priority <= 100:
            raise NetworkFormatError(
                f"edge {edge_id!r} priority must lie in [0, 100]", source, el.line)
        edges[edge_id] = EdgeSpec(edge_id, ends[0], ends[1], lanes, speed, priority, length)

    return edges


def _parse_connections(text, source, nodes, edges):
    connections = []
    seen = set()
    for el in _children(parse_xml(text, source, "connections"), "connection", source):
        pair = el.require("from", source), el.require("to", source)
        for edge_id in pair:
            if edge_id not in edges:
                raise NetworkFormatError(
                    f"connection references unknown edge {edge_id!r}", source, el.line)
        if edges[pair[1]].from_node != edges[pair[0]].to_node:
            raise NetworkFormatError(
                f"edge {pair[1]!r} does not start where {pair[0]!r} ends", source, el.line)
        if pair in seen:
            raise NetworkFormatError(
                f"duplicate connection {pair[0]}->{pair[1]}", source, el.line)
        seen.add(pair)
        connections.append(Connection(*pair, _turn_between(nodes, edges, *pair)))

    return tuple(connections)


def _parse_signals(text, source, network):
    programs = {}
    for el in _children(parse_xml(text, source, "signals"), "program", source):
        node_id = el.require("node", source)
        spec = network.nodes.get(node_id)
        if spec is None:
            raise NetworkFormatError(f"program for unknown node {node_id!r}", source, el.line)
        if spec.kind is not NodeKind.TRAFFIC_LIGHT:
            raise NetworkFormatError(f"node {node_id!r} is not a traffic light", source, el.line)
        if node_id in programs:
            raise NetworkFormatError(f"duplicate program for {node_id!r}", source, el.line)
        phases = []
        for phase_el in _children(el, "phase", source):
            state = phase_el.require("state", source)
            bad = [c for c in state if c not in _STATE_CHARS]
            if bad:
                raise NetworkFormatError(
                    f"unknown signal state {bad[0]!r}", source, phase_el.line)
            phases.append(Phase(phase_el.number("dur", source),
                                tuple(_STATE_CHARS[c] for c in state)))
        program = SignalProgram(node_id, tuple(phases), el.number("offset", source, default=0.0))
        _check_program(program, network, source, el.line)
        programs[node_id] = program

    return programs


def _with_default_programs(bare, signals):
    for spec in bare.traffic_light_nodes():
        if spec.id not in signals:
            signals[spec.id] = default_signal_program(bare, spec.id)

    return signals


def build_network(nodes: Mapping[str, NodeSpec], edges: Mapping[str, EdgeSpec],
                  pairs: Sequence[Tuple[str, str]]) -> RoadNetwork:
    """Network from generated parts: turn directions and signal programs are derived."""
    connections = tuple(Connection(a, b, _turn_between(nodes, edges, a, b)) for a, b in pairs)
    bare = RoadNetwork(nodes, edges, connections)

    return RoadNetwork(nodes, edges, connections, _with_default_programs(bare, {}))


def parse_network(nodes_doc: str, edges_doc: str, connections_doc: str,
                  signals_doc: Optional[str] = None,
                  sources: Sequence[str] = NETWORK_FILES) -> RoadNetwork:
    nodes = _parse_nodes(nodes_doc, sources[0])
    edges = _parse_edges(edges_doc, sources[1], nodes)
    connections = _parse_connections(connections_doc, sources[2], nodes, edges)

    bare = RoadNetwork(nodes, edges, connections)
    signals = _with_default_programs(bare, _parse_signals(signals_doc, sources[3], bare))
    LOG.debug("parsed network: %d nodes, %d edges, %d connections, %d signals",
              len(nodes), len(edges), len(connections), len(signals))

    return RoadNetwork(nodes, edges, connections, signals)


def _to_text(root):
    ET.indent(root)

    return ET.tostring(root, encoding="unicode") + "\n"


def serialize_network(network: RoadNetwork) -> NetworkDocuments:
    nodes = ET.Element("nodes")
    for n in network.nodes.values():
        ET.SubElement(nodes, "node", id=n.id, x=repr(n.position.x),
                      y=repr(n.position.y), type=n.kind.value)

    edges = ET.Element("edges")
    for e in network.edges.values():
        ET.SubElement(edges, "edge", {
            "id": e.id, "from": e.from_node, "to": e.to_node,
            "numLanes": str(e.num_lanes), "speed": repr(e.speed_limit),
            "priority": repr(e.priority),
        })

    connections = ET.Element("connections")
    for c in network.connections:
        ET.SubElement(connections, "connection", {"from": c.from_edge, "to": c.to_edge})

    signals = ET.Element("signals")
    for program in network.signals.values():
        attrs = {"node": program.node}
        if program.cycle_offset:
            attrs["offset"] = repr(program.cycle_offset)
        program_el = ET.SubElement(signals, "program", attrs)
        for phase in program.phases:
            ET.SubElement(program_el, "phase", dur=repr(phase.duration), state=phase.state_string)

    return NetworkDocuments(_to_text(nodes), _to_text(edges),
                            _to_text(connections), _to_text(signals))


def load_network(directory) -> RoadNetwork:
    directory = Path(directory)
    paths = [directory / name for name in NETWORK_FILES]
    for path in paths[:3]:
        if not path.is_file():
            raise NetworkFormatError("file not found", str(path))
    texts = [p.read_text(encoding="utf-8") for p in paths[:3]]
    signals = paths[3].read_text(encoding="utf-8") if paths[3].is_file() else None

    return parse_network(*texts, signals, sources=[str(p) for p in paths])


def save_network(network: RoadNetwork, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    docs = serialize_network(network)
    for name, text in zip(NETWORK_FILES, (docs.nodes, docs.edges, docs.connections, docs.signals)):
        (directory / name).write_text(text, encoding="utf-8")
