"""Network-layer packets carried between the application, AODV and the MAC."""
import itertools
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

from vanetsim.constants import BROADCAST, IP_HEADER, MAC_HEADER, UDP_HEADER


class PacketType(str, Enum):
    CBR = "cbr"
    RREQ = "RREQ"
    RREP = "RREP"
    RERR = "RERR"


def data_size(payload_bytes):
    return payload_bytes + UDP_HEADER + IP_HEADER + MAC_HEADER


def control_size(message_bytes):
    return message_bytes + IP_HEADER + MAC_HEADER


@dataclass(frozen=True)
class Packet:
    """
    ``uid`` is the trace packet id. Data packets keep it on every hop;
    each control transmission gets a fresh one.
    """

    uid: int
    ptype: PacketType
    src: str
    dst: str
    size: int
    ttl: int
    payload: Any = None
    flow_id: Optional[int] = None

    @property
    def is_data(self):
        return self.ptype is PacketType.CBR

    @property
    def is_broadcast(self):
        return self.dst == BROADCAST

    def hop(self):
        return replace(self, ttl=self.ttl - 1)


class PacketIds:
    def __init__(self, start=0):
        self._ids = itertools.count(start)

    def next(self):
        return next(self._ids)
