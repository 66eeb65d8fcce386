"""
Network event trace, one line per event:

    <time> <s|r|d|f> <node> <AGT|RTR|MAC|IFQ> <pkt_id> <pkt_type> <size> [reason]
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

from vanetsim.constants import DROP_REASONS
from vanetsim.errors import TraceFormatError

LOG = logging.getLogger(__name__)

ACTIONS = ("s", "r", "d", "f")
LAYERS = ("AGT", "RTR", "MAC", "IFQ")


@dataclass(frozen=True)
class TraceRecord:
    time: float
    action: str
    node: str
    layer: str
    pkt_id: int
    pkt_type: str
    size: int
    reason: Optional[str] = None

    def format(self):
        line = (f"{self.time:.6f} {self.action} {self.node} {self.layer} "
                f"{self.pkt_id} {self.pkt_type} {self.size}")

        return f"{line} {self.reason}" if self.reason else line


def parse_line(line, line_number=0) -> TraceRecord:
    fields = line.split()
    if len(fields) not in (7, 8):
        raise TraceFormatError(line_number, f"expected 7 or 8 fields, got {len(fields)}")
    time, action, node, layer, pkt_id, pkt_type, size = fields[:7]
    reason = fields[7] if len(fields) == 8 else None
    if action not in ACTIONS:
        raise TraceFormatError(line_number, f"unknown action {action!r}")
    if layer not in LAYERS:
        raise TraceFormatError(line_number, f"unknown layer {layer!r}")
    if reason is not None and (action != "d" or reason not in DROP_REASONS):
        raise TraceFormatError(line_number, f"unexpected drop reason {reason!r}")
    if action == "d" and reason is None:
        raise TraceFormatError(line_number, "drop without a reason")
    try:
        return TraceRecord(float(time), action, node, layer, int(pkt_id), pkt_type,
                           int(size), reason)
    except ValueError:
        raise TraceFormatError(line_number, "time, packet id and size must be numbers") from None


def parse_trace(lines: Iterable[str]):
    records = []
    for number, line in enumerate(lines, start=1):
        if line.strip():
            records.append(parse_line(line, number))

    return records


class EventTrace:
    def __init__(self):
        self.records = []

    def record(self, time, action, node, layer, packet, reason=None):
        self.records.append(TraceRecord(time, action, node, layer, packet.uid,
                                        packet.ptype.value, packet.size, reason))

    def lines(self):
        return [r.format() for r in self.records]

    def text(self):
        return "".join(line + "\n" for line in self.lines())


class PacketLedger:
    """
    Live copies of each data packet. A drop is written to the trace only
    when the last copy of a never-delivered packet disappears, so every
    sent packet ends in exactly one receive or one drop.
    """

    def __init__(self, trace: EventTrace, clock):
        self.trace = trace
        self.clock = clock
        self._copies: Dict[int, int] = {}
        self._packets = {}
        self._holder: Dict[int, str] = {}
        self._last_drop: Dict[int, tuple] = {}
        self._delivered = set()

    def __len__(self):
        return len(self._copies)

    def alive(self, packet):
        return packet.uid in self._copies

    def was_delivered(self, packet):
        return packet.uid in self._delivered

    def created(self, packet, node):
        self._copies[packet.uid] = 1
        self._packets[packet.uid] = packet
        self._holder[packet.uid] = node

    def copied(self, packet, node):
        if packet.uid in self._copies:
            self._copies[packet.uid] += 1
            self._holder[packet.uid] = node

    def delivered(self, packet, node):
        self._delivered.add(packet.uid)
        self._release(packet.uid)

    def released(self, packet):
        self._release(packet.uid)

    def dropped(self, packet, node, layer, reason):
        self._last_drop[packet.uid] = (node, layer, reason)
        self._release(packet.uid)

    def _release(self, uid):
        if uid not in self._copies:
            return
        self._copies[uid] -= 1
        if self._copies[uid] > 0:
            return
        del self._copies[uid]
        packet = self._packets.pop(uid)
        self._holder.pop(uid, None)
        drop = self._last_drop.pop(uid, None)
        if uid in self._delivered:
            return
        if drop is None:
            LOG.warning("packet %d vanished without a drop record", uid)
            return
        node, layer, reason = drop
        self.trace.record(self.clock.now, "d", node, layer, packet, reason)

    def close(self):
        """Drop every packet still alive with reason END."""
        count = 0
        for uid in sorted(self._copies):
            if uid in self._delivered:
                continue
            self.trace.record(self.clock.now, "d", self._holder[uid], "RTR",
                              self._packets[uid], "END")
            count += 1
        self._copies.clear()
        self._packets.clear()
        self._holder.clear()

        return count
