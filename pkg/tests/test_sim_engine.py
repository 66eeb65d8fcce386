import os
from dataclasses import replace

import pytest

from tests.conftest import line_positions
from vanetsim.config import ScenarioConfig, load_config
from vanetsim.errors import ScenarioError
from vanetsim.grid import route_document, write_grid_scenario
from vanetsim.metrics import summarize_sweep
from vanetsim.mobility import Route
from vanetsim.road_network import Point2D, save_network
from vanetsim.sim_engine import RngStreams, Simulation, StaticWorld, run, run_mobility, \
    validate_scenario

ROUTES = [Route("we", ("wc", "ce")), Route("sn", ("sc", "cn"))]


@pytest.fixture
def cross_dir(tmp_path, cross_network):
    save_network(cross_network, tmp_path / "net")
    for n in (3, 6):
        text = route_document(cross_network, ROUTES, n, seed=n, depart_window=(0.0, 5.0))
        (tmp_path / f"routes_{n}.xml").write_text(text, encoding="utf-8")
    return tmp_path


@pytest.fixture
def cross_scenario(cross_dir):
    return ScenarioConfig(net=cross_dir / "net", routes=str(cross_dir / "routes_{n}.xml"),
                          n_vehicles=6, duration=20.0)


#
# Random streams
#
class TestRngStreams:
    def test_streams_do_not_disturb_each_other(self):
        quiet = RngStreams(2)
        busy = RngStreams(2)
        busy.stream("aodv").random(1000)

        assert busy.stream("mac").random() == quiet.stream("mac").random()

    def test_stream_is_reused(self):
        streams = RngStreams(2)

        assert streams.stream("turns") is streams.stream("turns")

    def test_names_and_seeds_differ(self):
        assert RngStreams(2).stream("mac").random() != RngStreams(2).stream("aodv").random()
        assert RngStreams(2).stream("mac").random() != RngStreams(4).stream("mac").random()


#
# Scenario validation
#
class TestValidateScenario:
    def test_valid_scenario(self, cross_scenario):
        inputs = validate_scenario(cross_scenario)

        assert len(inputs.routes.vehicles) == 6
        assert inputs.turns is None

    def test_net_is_required(self):
        with pytest.raises(ScenarioError, match="scenario.net"):
            validate_scenario(ScenarioConfig())

    def test_routes_are_required(self, cross_scenario):
        with pytest.raises(ScenarioError, match="scenario.routes"):
            validate_scenario(replace(cross_scenario, routes=None))

    def test_missing_network(self, cross_scenario, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read network"):
            validate_scenario(replace(cross_scenario, net=tmp_path / "nowhere"))

    def test_missing_route_file(self, cross_scenario):
        with pytest.raises(ScenarioError, match="cannot read route file"):
            validate_scenario(replace(cross_scenario, n_vehicles=9))

    def test_vehicle_count_must_match(self, cross_dir, cross_scenario):
        scenario = replace(cross_scenario, routes=str(cross_dir / "routes_3.xml"))

        with pytest.raises(ScenarioError, match="defines 3 vehicles"):
            validate_scenario(scenario)

    def test_flow_endpoints_must_exist(self, cross_scenario):
        scenario = replace(cross_scenario, app=replace(cross_scenario.app, flows=(("v0", "v9"),)))

        with pytest.raises(ScenarioError, match="'v9'"):
            validate_scenario(scenario)


#
# Simulation over fixed placements
#
def test_no_vehicles_no_traffic(make_scenario):
    bundle = run(make_scenario(), StaticWorld({}))

    assert bundle.events == ""
    assert bundle.flows == []
    assert (bundle.counters.ps, bundle.counters.pr, bundle.counters.rd) == (0, 0, 0)
    assert bundle.mobility_csv.splitlines() == ["time,vehicle,edge,lane,pos,speed,x,y"]


def test_neighbors_lose_nothing(make_scenario):
    positions = {"n0": Point2D(0, 0), "n1": Point2D(100, 0)}

    bundle = run(make_scenario([("n0", "n1")], duration=3.0), StaticWorld(positions))

    assert bundle.counters.ps == 16
    assert bundle.counters.pr == 16
    assert bundle.counters.rd == 0
    assert bundle.events.splitlines()[0] == "1.000000 s n0 AGT 0 cbr 1056"
    assert bundle.warnings["conservation"] == 0


def test_same_seed_same_trace(make_scenario):
    def events():
        scenario = make_scenario([("n0", "n3")], duration=3.0)
        return run(scenario, StaticWorld(line_positions(4))).events

    assert events() == events()


def test_sends_from_a_departed_vehicle_are_skipped(make_scenario):
    world = StaticWorld(line_positions(2), removals={"n0": 1.9})

    bundle = run(make_scenario([("n0", "n1")], duration=3.0), world)

    assert bundle.warnings["skipped_sends"] == 8
    assert bundle.counters.ps == 8
    assert bundle.warnings["conservation"] == 0


class TestPositionOf:
    @pytest.fixture
    def sim(self, make_scenario):
        world = StaticWorld(line_positions(3), removals={"n2": 1.0})
        sim = Simulation(make_scenario(duration=2.0), world, world.nodes)
        sim.run()
        return sim

    def test_known_position(self, sim):
        assert sim.position_of("n1", 1.5) == Point2D(200.0, 0.0)

    def test_removed_vehicle(self, sim):
        assert sim.position_of("n2", 0.5) == Point2D(400.0, 0.0)
        with pytest.raises(ScenarioError, match="not on the road"):
            sim.position_of("n2", 1.5)

    def test_before_the_first_step(self, sim):
        with pytest.raises(ScenarioError):
            sim.position_of("n0", -1.0)


#
# Full runs
#
def test_cross_run_balances_every_flow(cross_scenario, tmp_path):
    bundle = run(replace(cross_scenario, app=replace(cross_scenario.app, start=2.0)))

    assert bundle.n_vehicles == 6
    assert len(bundle.flows) == 1
    assert bundle.warnings["conservation"] == 0
    assert bundle.counters.ps > 0

    out = bundle.write(tmp_path / "run")
    assert sorted(p.name for p in out.iterdir()) == ["counters.csv", "events.tr", "mobility.csv"]
    assert (out / "counters.csv").read_text().splitlines()[0] == "n_vehicles,seed,ps,pr,rd,pl"


def test_grid_run(tmp_path):
    path = write_grid_scenario(tmp_path, counts=[8], seed=3)
    scenario = load_config(path, {"scenario.n_vehicles": "8", "scenario.duration_s": "30",
                                  "app.start_s": "5"})

    bundle = run(scenario)

    assert bundle.warnings["conservation"] == 0
    assert bundle.counters.pl == bundle.counters.ps - bundle.counters.pr
    assert bundle.result.n_vehicles == 8


def test_mobility_only(cross_scenario):
    world = run_mobility(replace(cross_scenario, duration=10.0))

    rows = world.trace_rows
    assert rows
    assert {row[1] for row in rows} <= {f"v{i}" for i in range(6)}
    assert float(rows[-1][0]) == pytest.approx(9.9)


@pytest.mark.skipif(not os.environ.get("VANETSIM_SLOW"), reason="runs the density sweep")
def test_delivery_falls_as_density_rises(tmp_path):
    path = write_grid_scenario(tmp_path, counts=[10, 40, 70])
    results = {
        n: [run(load_config(path, {"scenario.n_vehicles": str(n), "scenario.seed": str(seed)}))
            .result for seed in (2, 4)]
        for n in (10, 40, 70)
    }

    rows = {row.n_vehicles: row for row in summarize_sweep(results, expected_seeds=(2, 4))}

    assert rows[10].adr_pct > rows[40].adr_pct > rows[70].adr_pct
    assert rows[70].pl_pct - rows[10].pl_pct >= 20.0
