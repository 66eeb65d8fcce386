"""Constant-bit-rate flows over UDP, one quarter of the vehicles sending."""
import logging
from dataclasses import dataclass
from typing import List, Sequence

from vanetsim.utils import verify_positive

LOG = logging.getLogger(__name__)

SENDER_SHARE = 4


@dataclass(frozen=True)
class AppConfig:
    packet_size: int = 1000
    rate: float = 64000.0
    start: float = 10.0
    max_packets: int = 2280000
    flows: Sequence[tuple] = ()

    def __post_init__(self):
        verify_positive("packet_size", self.packet_size)
        verify_positive("rate", self.rate)
        verify_positive("max_packets", self.max_packets)
        if self.start < 0:
            raise ValueError(f"start must be non-negative, got {self.start!r}")


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: str
    dst: str
    packet_size: int = 1000
    rate: float = 64000.0
    start: float = 10.0
    max_packets: int = 2280000

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"flow {self.flow_id} sends to itself ({self.src})")
        verify_positive("rate", self.rate)
        verify_positive("packet_size", self.packet_size)

    @property
    def interval(self):
        return cbr_interval(self.rate, self.packet_size)


@dataclass(frozen=True)
class AppPacket:
    packet_id: int
    flow_id: int
    seq: int
    send_time: float


def cbr_interval(rate, size):
    verify_positive("rate", rate)
    verify_positive("size", size)

    return 8 * size / rate


def _flow(flow_id, src, dst, config):
    return FlowSpec(flow_id, src, dst, config.packet_size, config.rate, config.start,
                    config.max_packets)


def select_flows(vehicles: Sequence[str], rng, config: AppConfig = None) -> List[FlowSpec]:
    """
    ``len(vehicles) // 4`` flows whose endpoints are all distinct vehicles,
    drawn without replacement.
    """
    config = config or AppConfig()
    n = len(vehicles)
    if n < SENDER_SHARE:
        raise ValueError(f"need at least {SENDER_SHARE} vehicles for a flow, got {n}")
    k = n // SENDER_SHARE
    picked = [vehicles[i] for i in rng.choice(n, size=2 * k, replace=False)]

    return [_flow(i, picked[i], picked[k + i], config) for i in range(k)]


def explicit_flows(pairs, vehicles, config: AppConfig = None) -> List[FlowSpec]:
    config = config or AppConfig()
    known = set(vehicles)
    flows = []
    for i, (src, dst) in enumerate(pairs):
        for node in (src, dst):
            if node not in known:
                raise ValueError(f"flow endpoint {node!r} is not a vehicle of the scenario")
        flows.append(_flow(i, src, dst, config))

    return flows


def parse_flow_pairs(text):
    """``"v0:v5, v2:v7"`` -> ``[("v0", "v5"), ("v2", "v7")]``."""
    pairs = []
    for item in text.replace(",", " ").split():
        src, sep, dst = item.partition(":")
        if not sep or not src or not dst:
            raise ValueError(f"flow {item!r} is not of the form src:dst")
        pairs.append((src, dst))

    return pairs


def emit_schedule(flow: FlowSpec, sim_end) -> List[float]:
    """Send times start, start + d, ... strictly before ``sim_end``, at most max_packets of them."""
    interval = flow.interval
    times = []
    i = 0
    while i < flow.max_packets:
        t = flow.start + i * interval
        if t >= sim_end:
            break
        times.append(t)
        i += 1

    return times
