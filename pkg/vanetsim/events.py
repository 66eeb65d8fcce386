import heapq
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from vanetsim.errors import SchedulingError

LOG = logging.getLogger(__name__)


class EventKind(str, Enum):
    MOBILITY_STEP = "mobility_step"
    APP_SEND = "app_send"
    MAC_TIMER = "mac_timer"
    AODV_TIMER = "aodv_timer"
    FRAME_END = "frame_end"
    NODE_LEAVE = "node_leave"


@dataclass(order=True)
class Event:
    time: float
    tiebreak_seq: int
    kind: EventKind = field(compare=False)
    action: Callable[[], Any] = field(compare=False, repr=False)
    payload: Any = field(default=None, compare=False)
    cancelled: bool = field(default=False, compare=False)

    def cancel(self):
        self.cancelled = True


class EventQueue:
    """Events dispatched in strict (time, scheduling order) order."""

    def __init__(self):
        self.now = 0.0
        self.dispatched = 0
        self._heap = []
        self._seq = itertools.count()

    def __len__(self):
        return sum(1 for e in self._heap if not e.cancelled)

    def schedule(self, time, kind, action, payload=None) -> Event:
        if time < self.now:
            raise SchedulingError(f"cannot schedule {kind.value} at {time} before now ({self.now})")
        event = Event(time, next(self._seq), kind, action, payload)
        heapq.heappush(self._heap, event)

        return event

    def schedule_in(self, delay, kind, action, payload=None) -> Event:
        return self.schedule(self.now + delay, kind, action, payload)

    def peek_time(self):
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)

        return self._heap[0].time if self._heap else None

    def dispatch_next(self) -> Event:
        if self.peek_time() is None:
            raise SchedulingError("dispatch on an empty event queue")
        event = heapq.heappop(self._heap)
        self.now = event.time
        self.dispatched += 1
        event.action()

        return event

    def run_until(self, end):
        """Dispatch every event strictly before ``end``, then set the clock to ``end``."""
        while True:
            t = self.peek_time()
            if t is None or t >= end:
                break
            self.dispatch_next()
        self.now = max(self.now, end)
        LOG.debug("event queue halted at %s after %d events", end, self.dispatched)
