import numpy as np
import pytest

from vanetsim.traffic_app import (
    AppConfig,
    FlowSpec,
    cbr_interval,
    emit_schedule,
    explicit_flows,
    parse_flow_pairs,
    select_flows,
)

VEHICLES = [f"v{i}" for i in range(10)]


def test_cbr_interval():
    assert cbr_interval(64000, 1000) == pytest.approx(0.125)


class TestEmitSchedule:
    def test_times_stop_before_the_end(self):
        flow = FlowSpec(0, "v0", "v1", start=10.0)

        times = emit_schedule(flow, 11.0)

        assert times == pytest.approx([10.0 + 0.125 * i for i in range(8)])

    def test_max_packets_caps_the_schedule(self):
        flow = FlowSpec(0, "v0", "v1", start=0.0, max_packets=3)

        assert len(emit_schedule(flow, 100.0)) == 3

    def test_start_after_end_sends_nothing(self):
        assert emit_schedule(FlowSpec(0, "v0", "v1", start=20.0), 10.0) == []


class TestSelectFlows:
    def test_a_quarter_of_the_vehicles_send(self):
        flows = select_flows(VEHICLES, np.random.default_rng(2))

        assert len(flows) == 2
        endpoints = [f.src for f in flows] + [f.dst for f in flows]
        assert len(set(endpoints)) == 4
        assert set(endpoints) <= set(VEHICLES)

    def test_same_seed_same_flows(self):
        first = select_flows(VEHICLES, np.random.default_rng(4))
        second = select_flows(VEHICLES, np.random.default_rng(4))

        assert first == second

    def test_flows_carry_the_app_settings(self):
        config = AppConfig(packet_size=512, rate=32000.0, start=5.0)

        flow = select_flows(VEHICLES, np.random.default_rng(2), config)[0]

        assert (flow.packet_size, flow.rate, flow.start) == (512, 32000.0, 5.0)
        assert flow.interval == pytest.approx(0.128)

    def test_too_few_vehicles(self):
        with pytest.raises(ValueError, match="at least 4"):
            select_flows(VEHICLES[:3], np.random.default_rng(2))


def test_explicit_flows_check_endpoints():
    flows = explicit_flows([("v0", "v5"), ("v2", "v7")], VEHICLES)

    assert [(f.flow_id, f.src, f.dst) for f in flows] == [(0, "v0", "v5"), (1, "v2", "v7")]
    with pytest.raises(ValueError, match="'v99'"):
        explicit_flows([("v0", "v99")], VEHICLES)


def test_parse_flow_pairs():
    assert parse_flow_pairs("v0:v5, v2:v7") == [("v0", "v5"), ("v2", "v7")]
    with pytest.raises(ValueError):
        parse_flow_pairs("v0-v5")


@pytest.mark.parametrize("kwargs", [{"rate": 0}, {"packet_size": -1}, {"start": -1.0}])
def test_app_config_validation(kwargs):
    with pytest.raises(ValueError):
        AppConfig(**kwargs)


def test_flow_cannot_send_to_itself():
    with pytest.raises(ValueError, match="itself"):
        FlowSpec(0, "v1", "v1")
