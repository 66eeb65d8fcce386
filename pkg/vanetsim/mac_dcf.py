"""
802.11 DCF basic access: drop-tail interface queue with a control band,
carrier sensing, binary exponential backoff, unicast ACK/retry and
overlap based collision resolution with capture. No RTS/CTS.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Callable, Dict, Iterable, Optional

from vanetsim.constants import ACK_SIZE, BROADCAST, IFQ_LEN
from vanetsim.events import EventKind
from vanetsim.packet import Packet
from vanetsim.phy_channel import PhyConfig, Transmission, propagation_power, received_powers
from vanetsim.utils import distance

LOG = logging.getLogger(__name__)

CAPTURE_RATIO = 10.0
HISTORY_S = 0.05


@dataclass(frozen=True)
class MacConfig:
    slot: float = 20e-6
    sifs: float = 10e-6
    difs: float = 50e-6
    cw_min: int = 31
    cw_max: int = 1023
    retry_limit: int = 7
    data_rate: float = 2e6
    basic_rate: float = 1e6
    ifq_len: int = IFQ_LEN

    def __post_init__(self):
        if not 0 <= self.cw_min < self.cw_max:
            raise ValueError(f"need 0 <= cw_min < cw_max, got {self.cw_min}, {self.cw_max}")
        for name in ("slot", "sifs", "difs", "data_rate", "basic_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.retry_limit < 0 or self.ifq_len < 1:
            raise ValueError("retry_limit must be >= 0 and ifq_len >= 1")

    def airtime(self, size_bytes, rate):
        return 8 * size_bytes / rate

    @property
    def ack_timeout(self):
        return self.sifs + self.airtime(ACK_SIZE, self.basic_rate) + self.slot


class Band(IntEnum):
    CONTROL = 0
    DATA = 1


class QueueVerdict(str, Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"


class Verdict(str, Enum):
    DELIVERED = "delivered"
    COLLIDED = "collided"
    BELOW_THRESHOLD = "below_threshold"


class FrameKind(str, Enum):
    DATA = "data"
    ACK = "ack"


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    sender: str
    receiver: str
    seq: int
    size: int
    packet: Optional[Packet] = None

    @property
    def is_broadcast(self):
        return self.receiver == BROADCAST


@dataclass(frozen=True)
class FrameOutcome:
    frame_id: int
    receiver: str
    verdict: Verdict


class IfQueue:
    """Drop-tail queue of ``capacity`` frames in total; the control band is always served first."""

    def __init__(self, capacity=IFQ_LEN):
        self.capacity = capacity
        self._bands = {Band.CONTROL: [], Band.DATA: []}

    def __len__(self):
        return sum(len(b) for b in self._bands.values())

    def enqueue(self, frame, band=Band.DATA) -> QueueVerdict:
        if len(self) >= self.capacity:
            return QueueVerdict.DROPPED
        self._bands[band].append(frame)

        return QueueVerdict.ACCEPTED

    def dequeue(self):
        for band in Band:
            if self._bands[band]:
                return self._bands[band].pop(0)

        return None

    def remove_if(self, predicate):
        removed = []
        for band, frames in self._bands.items():
            keep = []
            for f in frames:
                (removed if predicate(f) else keep).append(f)
            self._bands[band] = keep

        return removed

    def drain(self):
        return self.remove_if(lambda f: True)


def enqueue(queue: IfQueue, frame, band=Band.DATA) -> QueueVerdict:
    return queue.enqueue(frame, band)


def backoff_draw(cw, rng):
    return int(rng.integers(0, cw + 1))


def next_cw(cw, config: MacConfig):
    return min(2 * cw + 1, config.cw_max)


def resolve_receptions(overlapping: Iterable[Transmission], receiver_position,
                       cfg: PhyConfig, receiver="") -> set:
    """
    Verdict for each frame of a set overlapping in time at one receiver.
    Only signals at or above the carrier-sense threshold interfere.
    """
    powers = {}
    for tx in overlapping:
        d = distance(tx.sender_position, receiver_position)
        powers[tx.frame_id] = math.inf if d == 0 else propagation_power(cfg, d)
    audible = {fid: p for fid, p in powers.items() if p >= cfg.cs_thresh}
    total = sum(audible.values())

    outcomes = set()
    for fid, p in powers.items():
        if p < cfg.rx_thresh:
            verdict = Verdict.BELOW_THRESHOLD
        else:
            others = total - p if math.isfinite(p) else sum(
                q for f, q in audible.items() if f != fid)
            verdict = Verdict.DELIVERED if p >= CAPTURE_RATIO * others else Verdict.COLLIDED
        outcomes.add(FrameOutcome(fid, receiver, verdict))

    return outcomes


class MacListener:
    """What a MAC reports upwards. The default does nothing."""

    def frame_received(self, mac, frame):
        pass

    def frame_sent(self, mac, frame):
        pass

    def frame_failed(self, mac, frame):
        pass

    def frame_dropped(self, mac, frame, reason):
        pass

    def transmission_started(self, mac, frame):
        pass


class Medium:
    """
    The shared channel. Received powers are fixed when a frame starts;
    receptions are resolved when it ends.
    """

    def __init__(self, cfg: PhyConfig, clock, positions: Callable[[], Dict[str, object]]):
        self.cfg = cfg
        self.clock = clock
        self.positions = positions
        self.macs: Dict[str, "DcfMac"] = {}
        self.on_air: Dict[int, Transmission] = {}
        self.history = []
        self._powers: Dict[int, Dict[str, float]] = {}
        self._ids = itertools.count()
        self.collisions = 0

    def attach(self, mac):
        self.macs[mac.node] = mac

    def detach(self, node):
        self.macs.pop(node, None)

    def power_at(self, frame_id, node):
        return self._powers.get(frame_id, {}).get(node, 0.0)

    def is_busy(self, node):
        return any(tx.sender == node or self.power_at(fid, node) >= self.cfg.cs_thresh
                   for fid, tx in self.on_air.items())

    def begin(self, frame: Frame, duration):
        positions = self.positions()
        sender_pos = positions[frame.sender]
        tx = Transmission(next(self._ids), frame.sender, sender_pos, self.clock.now,
                          duration, self.cfg.pt, frame)
        nodes = [n for n in positions if n != frame.sender]
        coords = [(positions[n].x, positions[n].y) for n in nodes]
        powers = received_powers(self.cfg, sender_pos, coords) if nodes else []
        self._powers[tx.frame_id] = {n: float(p) for n, p in zip(nodes, powers)}
        self.on_air[tx.frame_id] = tx
        self.history.append(tx)
        for node, p in self._powers[tx.frame_id].items():
            if p >= self.cfg.cs_thresh and node in self.macs:
                self.macs[node].medium_busy()
        self.clock.schedule(tx.end, EventKind.FRAME_END, lambda: self.end(tx), tx.frame_id)

        return tx

    def _overlapping(self, tx, node):
        return [o for o in self.history
                if o.overlaps(tx) and (o.frame_id == tx.frame_id
                                       or self.power_at(o.frame_id, node) >= self.cfg.cs_thresh)]

    def _transmitted_during(self, node, tx):
        return any(o.sender == node and o.overlaps(tx) for o in self.history)

    def end(self, tx: Transmission):
        del self.on_air[tx.frame_id]
        frame = tx.frame
        if frame.sender in self.macs:
            self.macs[frame.sender].transmission_ended(frame)

        positions = self.positions()
        for node, p in self._powers[tx.frame_id].items():
            mac = self.macs.get(node)
            if mac is None or p < self.cfg.cs_thresh or node not in positions:
                continue
            addressed = frame.is_broadcast or frame.receiver == node
            if not addressed:
                continue
            if self._transmitted_during(node, tx):
                verdict = Verdict.COLLIDED
            else:
                outcomes = resolve_receptions(self._overlapping(tx, node), positions[node],
                                              self.cfg, node)
                verdict = next(o.verdict for o in outcomes if o.frame_id == tx.frame_id)
            if verdict is Verdict.DELIVERED:
                mac.receive(frame)
            elif verdict is Verdict.COLLIDED:
                self.collisions += 1
                mac.collided(frame)

        listeners = [n for n, p in self._powers[tx.frame_id].items() if p >= self.cfg.cs_thresh]
        for node in [frame.sender] + listeners:
            if node in self.macs and not self.is_busy(node):
                self.macs[node].medium_idle()
        self._prune()

    def _prune(self):
        horizon = self.clock.now - HISTORY_S
        keep = [t for t in self.history if t.end >= horizon or t.frame_id in self.on_air]
        for t in self.history:
            if t.end < horizon and t.frame_id not in self.on_air:
                self._powers.pop(t.frame_id, None)
        self.history = keep


class MacState(str, Enum):
    IDLE = "idle"
    CONTENDING = "contending"
    TRANSMITTING = "transmitting"
    WAIT_ACK = "wait_ack"


class DcfMac:
    """One node's DCF entity."""

    def __init__(self, node, medium: Medium, clock, rng, config: MacConfig = None,
                 listener: MacListener = None):
        self.node = node
        self.medium = medium
        self.clock = clock
        self.rng = rng
        self.config = config or MacConfig()
        self.listener = listener or MacListener()
        self.queue = IfQueue(self.config.ifq_len)
        self.state = MacState.IDLE
        self.cw = self.config.cw_min
        self.current: Optional[Frame] = None
        self.attempts = 0
        self.backoff: Optional[int] = None
        self._timer = None
        self._countdown_start = None
        self._seq = itertools.count()
        self._last_seen: Dict[str, int] = {}
        medium.attach(self)

    #
    # upper layer
    #
    def send(self, packet: Packet, next_hop, band=Band.DATA) -> QueueVerdict:
        frame = Frame(FrameKind.DATA, self.node, next_hop, next(self._seq), packet.size, packet)
        verdict = self.queue.enqueue(frame, band)
        if verdict is QueueVerdict.DROPPED:
            self.listener.frame_dropped(self, frame, "IFQ")
        else:
            self._try_start()

        return verdict

    def purge(self, predicate):
        """Remove queued frames matching ``predicate``; the frame on the air is left alone."""
        return self.queue.remove_if(predicate)

    def shutdown(self):
        """Cancel timers and hand back every frame still held."""
        self._cancel_timer()
        self.medium.detach(self.node)
        held = self.queue.drain()
        if self.current is not None:
            held.insert(0, self.current)
        self.current = None
        self.state = MacState.IDLE

        return held

    #
    # contention
    #
    def _cancel_timer(self):
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def _try_start(self):
        if self.state is not MacState.IDLE:
            return
        if self.current is None:
            self.current = self.queue.dequeue()
            if self.current is None:
                return
            self.attempts = 0
        if self.backoff is None:
            self.backoff = backoff_draw(self.cw, self.rng)
        self.state = MacState.CONTENDING
        if not self.medium.is_busy(self.node):
            self._start_countdown()

    def _start_countdown(self):
        self._countdown_start = self.clock.now
        delay = self.config.difs + self.backoff * self.config.slot
        self._timer = self.clock.schedule_in(delay, EventKind.MAC_TIMER, self._transmit, self.node)

    def medium_busy(self):
        if self.state is not MacState.CONTENDING or self._timer is None:
            return
        elapsed = self.clock.now - self._countdown_start - self.config.difs
        if elapsed > 0:
            self.backoff = max(self.backoff - int(elapsed / self.config.slot + 1e-9), 0)
        self._cancel_timer()

    def medium_idle(self):
        if self.state is MacState.CONTENDING and self._timer is None:
            self._start_countdown()

    def _transmit(self):
        self._timer = None
        frame = self.current
        self.state = MacState.TRANSMITTING
        self.backoff = None
        self.attempts += 1
        rate = self.config.basic_rate if frame.is_broadcast else self.config.data_rate
        self.listener.transmission_started(self, frame)
        self.medium.begin(frame, self.config.airtime(frame.size, rate))

    def transmission_ended(self, frame):
        if frame.kind is FrameKind.ACK:
            return
        if frame.is_broadcast:
            self._finish(frame, success=True)
            return
        self.state = MacState.WAIT_ACK
        self._timer = self.clock.schedule_in(self.config.ack_timeout, EventKind.MAC_TIMER,
                                             self._ack_timeout, self.node)

    def _ack_timeout(self):
        self._timer = None
        if self.attempts > self.config.retry_limit:
            LOG.debug("%s: %d attempts to %s failed", self.node, self.attempts,
                      self.current.receiver)
            self._finish(self.current, success=False)
            return
        self.cw = next_cw(self.cw, self.config)
        self.state = MacState.IDLE
        self._try_start()

    def _finish(self, frame, success):
        self.current = None
        self.cw = self.config.cw_min
        self.state = MacState.IDLE
        if success:
            self.listener.frame_sent(self, frame)
        else:
            self.listener.frame_dropped(self, frame, "RET")
            self.listener.frame_failed(self, frame)
        self._try_start()

    #
    # reception
    #
    def receive(self, frame: Frame):
        if frame.kind is FrameKind.ACK:
            if (self.state is MacState.WAIT_ACK and self.current is not None
                    and frame.seq == self.current.seq and frame.sender == self.current.receiver):
                self._cancel_timer()
                self._finish(self.current, success=True)
            return

        if not frame.is_broadcast:
            self.clock.schedule_in(self.config.sifs, EventKind.MAC_TIMER,
                                   lambda: self._send_ack(frame), self.node)
            if self._last_seen.get(frame.sender) == frame.seq:
                return
            self._last_seen[frame.sender] = frame.seq
        self.listener.frame_received(self, frame)

    def collided(self, frame: Frame):
        if frame.kind is FrameKind.DATA:
            self.listener.frame_dropped(self, frame, "COL")

    def _send_ack(self, frame):
        if self.state is MacState.TRANSMITTING or self.node not in self.medium.macs:
            return
        ack = Frame(FrameKind.ACK, self.node, frame.sender, frame.seq, ACK_SIZE)
        self.medium_busy()
        self.medium.begin(ack, self.config.airtime(ACK_SIZE, self.config.basic_rate))
