"""
AODV route discovery and maintenance (RFC 3561 semantics).

Expanding-ring RREQ floods, RREP establishment of forward routes, RERR on
MAC-detected link breaks, destination sequence numbers compared in 32-bit
circular arithmetic, and per-destination buffering while a discovery runs.
There are no HELLO messages: a link is broken when the MAC gives up on a
unicast frame. Gratuitous RREP, RREP-ACK and local repair are not used.
"""
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Set, Tuple

from vanetsim.constants import BROADCAST, RERR_BASE_SIZE, RERR_PER_DEST, RREP_SIZE, RREQ_SIZE
from vanetsim.events import EventKind
from vanetsim.packet import Packet, PacketType, control_size
from vanetsim.utils import verify_positive

LOG = logging.getLogger(__name__)

SEQ_MODULO = 2 ** 32
SEQ_HALF = 2 ** 31


@dataclass(frozen=True)
class AodvConfig:
    active_route_timeout: float = 3.0
    node_traversal_time: float = 0.04
    net_diameter: int = 35
    rreq_retries: int = 2
    ttl_start: int = 1
    ttl_increment: int = 2
    ttl_threshold: int = 7
    buffer_per_dest: int = 64
    broadcast_jitter: float = 0.01

    def __post_init__(self):
        for name in ("active_route_timeout", "node_traversal_time", "net_diameter",
                     "ttl_start", "ttl_increment", "ttl_threshold", "buffer_per_dest"):
            verify_positive(name, getattr(self, name))
        if self.rreq_retries < 0 or self.broadcast_jitter < 0:
            raise ValueError("rreq_retries and broadcast_jitter must be non-negative")

    @property
    def my_route_timeout(self):
        return 2 * self.active_route_timeout

    @property
    def net_traversal_time(self):
        return 2 * self.node_traversal_time * self.net_diameter

    def ring_timeout(self, ttl):
        if ttl >= self.net_diameter:
            return self.net_traversal_time

        return 2 * self.node_traversal_time * (ttl + 2)


class RouteState(str, Enum):
    VALID = "valid"
    INVALID = "invalid"


@dataclass
class RouteEntry:
    dest: str
    next_hop: str
    hop_count: int
    dest_seq: int = 0
    valid_seq: bool = False
    state: RouteState = RouteState.VALID
    lifetime: float = 0.0
    precursors: Set[str] = field(default_factory=set)

    def is_active(self, now):
        return self.state is RouteState.VALID and self.lifetime > now


@dataclass(frozen=True)
class RreqMessage:
    orig: str
    orig_seq: int
    dest: str
    dest_seq: Optional[int]
    rreq_id: int
    hop_count: int = 0
    ttl: int = 1


@dataclass(frozen=True)
class RrepMessage:
    orig: str
    dest: str
    dest_seq: int
    hop_count: int
    lifetime: float


@dataclass(frozen=True)
class RerrMessage:
    unreachable: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        if not self.unreachable:
            raise ValueError("RERR needs at least one unreachable destination")

    @property
    def size(self):
        return RERR_BASE_SIZE + RERR_PER_DEST * len(self.unreachable)


class RreqAction(str, Enum):
    OWN = "own"
    DUPLICATE = "duplicate"
    REPLIED = "replied"
    INTERMEDIATE_REPLY = "intermediate_reply"
    REBROADCAST = "rebroadcast"
    DISCARDED = "discarded"


class RrepAction(str, Enum):
    ESTABLISHED = "established"
    FORWARDED = "forwarded"
    STALE = "stale"
    NO_REVERSE_ROUTE = "no_reverse_route"


class SendResult(str, Enum):
    FORWARDED = "forwarded"
    BUFFERED = "buffered"
    DROPPED = "dropped"


#
# Sequence numbers
#
def seq_newer(a, b):
    """True if ``a`` is newer than ``b`` in signed 32-bit circular order."""
    diff = (a - b) % SEQ_MODULO

    return 0 < diff < SEQ_HALF


def seq_max(a, b):
    return a if seq_newer(a, b) else b


def seq_next(a):
    return (a + 1) % SEQ_MODULO


def fresher(candidate_seq, candidate_hops, entry: Optional[RouteEntry]):
    if entry is None or not entry.valid_seq:
        return True
    if seq_newer(candidate_seq, entry.dest_seq):
        return True

    return candidate_seq == entry.dest_seq and candidate_hops < entry.hop_count


def is_stale(candidate_seq, entry: Optional[RouteEntry]):
    return entry is not None and entry.valid_seq and seq_newer(entry.dest_seq, candidate_seq)


@dataclass
class Discovery:
    ttl: int
    retries: int = 0
    timer: object = None


class AodvAgent:
    """
    Routing state of one node. ``host`` connects the agent to its MAC,
    application and trace:

    - ``transmit(agent, packet, next_hop)`` hands a packet to the MAC
    - ``deliver(agent, packet)`` passes data addressed here to the application
    - ``drop(agent, packet, reason)`` records a routing-layer drop
    - ``trace(agent, action, packet)`` records a routing-layer send or forward
    - ``new_packet_id()`` allocates a trace packet id
    - ``purge_next_hop(agent, neighbor)`` drops queued frames towards a lost neighbor
    """

    def __init__(self, node, clock, rng, host, config: AodvConfig = None):
        self.node = node
        self.clock = clock
        self.rng = rng
        self.host = host
        self.config = config or AodvConfig()
        self.seq = 0
        self.rreq_id = 0
        self.table: Dict[str, RouteEntry] = {}
        self.seen: Set[Tuple[str, int]] = set()
        self.buffers: Dict[str, deque] = {}
        self.discoveries: Dict[str, Discovery] = {}
        self.rrep_discarded = 0

    @property
    def now(self):
        return self.clock.now

    def route(self, dest) -> Optional[RouteEntry]:
        entry = self.table.get(dest)
        if entry is not None and entry.state is RouteState.VALID and entry.lifetime <= self.now:
            entry.state = RouteState.INVALID

        return entry if entry is not None and entry.is_active(self.now) else None

    #
    # Table maintenance
    #
    def _update_route(self, dest, next_hop, hops, seq, valid_seq, lifetime):
        """Install a route if it is at least as fresh as the stored one; returns the entry."""
        entry = self.table.get(dest)
        if entry is None or not entry.is_active(self.now) and not is_stale(seq, entry) \
                or (valid_seq and fresher(seq, hops, entry)):
            precursors = entry.precursors if entry is not None else set()
            entry = RouteEntry(dest, next_hop, hops, seq, valid_seq, RouteState.VALID,
                               self.now + lifetime, precursors)
            self.table[dest] = entry
            self._flush(dest)
        elif entry.is_active(self.now) and entry.next_hop == next_hop:
            entry.lifetime = max(entry.lifetime, self.now + lifetime)

        return entry

    def _touch(self, dest):
        entry = self.table.get(dest)
        if entry is not None and entry.is_active(self.now):
            entry.lifetime = max(entry.lifetime, self.now + self.config.active_route_timeout)

    def _neighbor_route(self, neighbor):
        entry = self.table.get(neighbor)
        seq = entry.dest_seq if entry is not None else 0
        valid_seq = entry.valid_seq if entry is not None else False
        if entry is None or not entry.is_active(self.now) or entry.hop_count != 1:
            self.table[neighbor] = RouteEntry(neighbor, neighbor, 1, seq, valid_seq,
                                              RouteState.VALID,
                                              self.now + self.config.active_route_timeout,
                                              entry.precursors if entry is not None else set())
            self._flush(neighbor)
        else:
            self._touch(neighbor)

    #
    # Packets out
    #
    def _control(self, ptype, dst, message, size, ttl=1):
        return Packet(self.host.new_packet_id(), ptype, self.node, dst, control_size(size),
                      ttl, message)

    def _broadcast(self, packet, jitter=True):
        def send():
            self.host.trace(self, "s", packet)
            self.host.transmit(self, packet, BROADCAST)

        if jitter and self.config.broadcast_jitter > 0:
            delay = float(self.rng.uniform(0.0, self.config.broadcast_jitter))
            self.clock.schedule_in(delay, EventKind.AODV_TIMER, send, self.node)
        else:
            send()

    def _unicast(self, packet, next_hop, action="s"):
        self.host.trace(self, action, packet)
        self.host.transmit(self, packet, next_hop)

    def send_data(self, packet: Packet) -> SendResult:
        """Send or forward a data packet towards ``packet.dst``."""
        originated = packet.src == self.node
        if not originated:
            packet = packet.hop()
            if packet.ttl <= 0:
                self.host.drop(self, packet, "TTL")
                return SendResult.DROPPED

        entry = self.route(packet.dst)
        if entry is not None:
            self._touch(packet.dst)
            self._touch(entry.next_hop)
            if not originated:
                self._touch(packet.src)
            self._unicast(packet, entry.next_hop, "s" if originated else "f")
            return SendResult.FORWARDED

        if not originated:
            self.host.drop(self, packet, "NRTE")
            known = self.table.get(packet.dst)
            seq = known.dest_seq if known is not None else 0
            self._broadcast(self._control(PacketType.RERR, BROADCAST,
                                          RerrMessage(((packet.dst, seq),)),
                                          RERR_BASE_SIZE + RERR_PER_DEST))
            return SendResult.DROPPED

        buffer = self.buffers.setdefault(packet.dst, deque())
        if len(buffer) >= self.config.buffer_per_dest:
            self.host.drop(self, buffer.popleft(), "NRTE")
        buffer.append(packet)
        if packet.dst not in self.discoveries:
            self.start_discovery(packet.dst)

        return SendResult.BUFFERED

    def _flush(self, dest):
        if self.route(dest) is None:
            return
        discovery = self.discoveries.pop(dest, None)
        if discovery is not None and discovery.timer is not None:
            discovery.timer.cancel()
        for packet in self.buffers.pop(dest, ()):
            self.send_data(packet)

    #
    # Discovery
    #
    def start_discovery(self, dest):
        discovery = Discovery(ttl=self.config.ttl_start)
        self.discoveries[dest] = discovery
        self._send_rreq(dest, discovery)

    def _send_rreq(self, dest, discovery):
        self.seq = seq_next(self.seq)
        self.rreq_id += 1
        self.seen.add((self.node, self.rreq_id))
        known = self.table.get(dest)
        dest_seq = known.dest_seq if known is not None and known.valid_seq else None
        msg = RreqMessage(self.node, self.seq, dest, dest_seq, self.rreq_id, 0, discovery.ttl)
        LOG.debug("%s: RREQ %d for %s, ttl %d", self.node, self.rreq_id, dest, discovery.ttl)
        self._broadcast(self._control(PacketType.RREQ, BROADCAST, msg, RREQ_SIZE, msg.ttl),
                        jitter=False)
        discovery.timer = self.clock.schedule_in(
            self.config.ring_timeout(discovery.ttl), EventKind.AODV_TIMER,
            lambda: self._discovery_timeout(dest), self.node)

    def _discovery_timeout(self, dest):
        discovery = self.discoveries.get(dest)
        if discovery is None:
            return
        if self.route(dest) is not None:
            self._flush(dest)
            return

        cfg = self.config
        if discovery.ttl >= cfg.net_diameter:
            discovery.retries += 1
            if discovery.retries > cfg.rreq_retries:
                self._discovery_failed(dest)
                return
        elif discovery.ttl + cfg.ttl_increment <= cfg.ttl_threshold:
            discovery.ttl += cfg.ttl_increment
        else:
            discovery.ttl = cfg.net_diameter
        self._send_rreq(dest, discovery)

    def _discovery_failed(self, dest):
        del self.discoveries[dest]
        buffer = self.buffers.pop(dest, deque())
        LOG.debug("%s: no route to %s, dropping %d packets", self.node, dest, len(buffer))
        for packet in buffer:
            self.host.drop(self, packet, "NRTE")

    #
    # Packets in
    #
    def receive(self, packet: Packet, prev_hop):
        if packet.ptype is PacketType.RREQ:
            return self.process_rreq(packet.payload, prev_hop)
        if packet.ptype is PacketType.RREP:
            return self.process_rrep(packet.payload, prev_hop)
        if packet.ptype is PacketType.RERR:
            return self.process_rerr(packet.payload, prev_hop)
        if packet.dst == self.node:
            self._touch(packet.src)
            self._touch(prev_hop)
            return self.host.deliver(self, packet)

        return self.send_data(packet)

    def process_rreq(self, msg: RreqMessage, prev_hop) -> RreqAction:
        if msg.orig == self.node:
            return RreqAction.OWN
        key = (msg.orig, msg.rreq_id)
        if key in self.seen:
            return RreqAction.DUPLICATE
        self.seen.add(key)

        cfg = self.config
        self._neighbor_route(prev_hop)
        reverse = self._update_route(msg.orig, prev_hop, msg.hop_count + 1, msg.orig_seq, True,
                                     cfg.active_route_timeout)

        if msg.dest == self.node:
            requested = msg.dest_seq if msg.dest_seq is not None else self.seq
            self.seq = seq_next(seq_max(self.seq, requested))
            rrep = RrepMessage(msg.orig, self.node, self.seq, 0, cfg.my_route_timeout)
            self._unicast(self._control(PacketType.RREP, msg.orig, rrep, RREP_SIZE), prev_hop)
            return RreqAction.REPLIED

        entry = self.route(msg.dest)
        if entry is not None and entry.valid_seq and (
                msg.dest_seq is None or not seq_newer(msg.dest_seq, entry.dest_seq)):
            rrep = RrepMessage(msg.orig, msg.dest, entry.dest_seq, entry.hop_count,
                               entry.lifetime - self.now)
            entry.precursors.add(prev_hop)
            reverse.precursors.add(entry.next_hop)
            self._unicast(self._control(PacketType.RREP, msg.orig, rrep, RREP_SIZE), prev_hop)
            return RreqAction.INTERMEDIATE_REPLY

        if msg.ttl <= 1:
            return RreqAction.DISCARDED
        dest_seq = msg.dest_seq
        known = self.table.get(msg.dest)
        if known is not None and known.valid_seq:
            dest_seq = known.dest_seq if dest_seq is None else seq_max(dest_seq, known.dest_seq)
        forwarded = replace(msg, ttl=msg.ttl - 1, hop_count=msg.hop_count + 1, dest_seq=dest_seq)
        self._broadcast(self._control(PacketType.RREQ, BROADCAST, forwarded, RREQ_SIZE,
                                      forwarded.ttl))

        return RreqAction.REBROADCAST

    def process_rrep(self, msg: RrepMessage, prev_hop) -> RrepAction:
        self._neighbor_route(prev_hop)
        hops = msg.hop_count + 1
        if is_stale(msg.dest_seq, self.table.get(msg.dest)):
            LOG.debug("%s: stale RREP for %s from %s", self.node, msg.dest, prev_hop)
            return RrepAction.STALE
        forward = self._update_route(msg.dest, prev_hop, hops, msg.dest_seq, True, msg.lifetime)

        if msg.orig == self.node:
            self._flush(msg.dest)
            return RrepAction.ESTABLISHED

        reverse = self.route(msg.orig)
        if reverse is None:
            self.rrep_discarded += 1
            LOG.debug("%s: RREP for %s discarded, no reverse route", self.node, msg.orig)
            return RrepAction.NO_REVERSE_ROUTE
        forward.precursors.add(reverse.next_hop)
        reverse.precursors.add(prev_hop)
        self._touch(msg.orig)
        packet = self._control(PacketType.RREP, msg.orig, replace(msg, hop_count=hops), RREP_SIZE)
        self._unicast(packet, reverse.next_hop, "f")

        return RrepAction.FORWARDED

    def process_rerr(self, msg: RerrMessage, prev_hop):
        lost = []
        for dest, seq in msg.unreachable:
            entry = self.table.get(dest)
            if entry is not None and entry.is_active(self.now) and entry.next_hop == prev_hop:
                entry.state = RouteState.INVALID
                entry.dest_seq = seq_max(entry.dest_seq, seq) if entry.valid_seq else seq
                if entry.precursors:
                    lost.append((dest, entry.dest_seq))
        if lost:
            self._send_rerr(lost)

        return lost

    def _send_rerr(self, unreachable):
        msg = RerrMessage(tuple(unreachable))
        self._broadcast(self._control(PacketType.RERR, BROADCAST, msg, msg.size))

        return msg

    def handle_link_break(self, lost_neighbor) -> Optional[RerrMessage]:
        """Invalidate every route through ``lost_neighbor`` and report the ones others use."""
        broken = [e for e in self.table.values()
                  if e.next_hop == lost_neighbor and e.is_active(self.now)]
        for entry in broken:
            entry.state = RouteState.INVALID
            entry.dest_seq = seq_next(entry.dest_seq)
        self.host.purge_next_hop(self, lost_neighbor)
        unreachable = [(e.dest, e.dest_seq) for e in broken if e.precursors]
        LOG.debug("%s: link to %s broken, %d routes invalidated", self.node, lost_neighbor,
                  len(broken))

        return self._send_rerr(unreachable) if unreachable else None

    def shutdown(self):
        """Hand back every buffered packet and stop all discoveries."""
        for discovery in self.discoveries.values():
            if discovery.timer is not None:
                discovery.timer.cancel()
        self.discoveries.clear()
        held = [p for buffer in self.buffers.values() for p in buffer]
        self.buffers.clear()

        return held
