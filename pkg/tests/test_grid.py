import pytest

from vanetsim.config import load_config
from vanetsim.grid import build_grid, grid_routes, route_document, scenario_template, \
    write_grid_scenario
from vanetsim.mobility import parse_routes
from vanetsim.road_network import NodeKind, load_network, save_network, serialize_network
from vanetsim.sim_engine import validate_scenario


@pytest.fixture(scope="module")
def grid():
    return build_grid()


def test_grid_shape(grid):
    kinds = [n.kind for n in grid.nodes.values()]

    assert len(grid.nodes) == 21
    assert kinds.count(NodeKind.TRAFFIC_LIGHT) == 9
    assert len(grid.edges) == 48
    assert len(grid.connections) == 120
    assert len(grid.signals) == 9


def test_grid_needs_a_block():
    with pytest.raises(ValueError):
        build_grid(blocks=0)


def test_routes_follow_connections(grid):
    routes = grid_routes(grid, n_routes=10, route_length=8, seed=5)

    assert len(routes) == 10
    for route in routes:
        assert len(route.edges) == 8
        assert grid.nodes[grid.edges[route.edges[0]].from_node].kind is NodeKind.PRIORITY
        for into, out in zip(route.edges, route.edges[1:]):
            assert out in [c.to_edge for c in grid.outgoing(into)]


def test_route_document_parses(grid):
    routes = grid_routes(grid, seed=5)
    text = route_document(grid, routes, 12, seed=7)

    parsed = parse_routes(text, grid)

    assert [v.id for v in parsed.vehicles] == [f"v{i}" for i in range(12)]
    assert all(0.0 <= v.depart <= 50.0 for v in parsed.vehicles)
    assert route_document(grid, routes, 12, seed=7) == text


def test_scenario_template():
    assert scenario_template().splitlines()[1:4] == [
        "scenario.net = net", "scenario.routes = routes_{n}.xml", "scenario.duration_s = 200"]


def test_written_scenario_validates(tmp_path, grid):
    path = write_grid_scenario(tmp_path, counts=[10, 20], seed=1)

    assert path == tmp_path / "scenario.cfg"
    loaded = load_network(tmp_path / "net")
    assert set(loaded.edges) == set(grid.edges)
    assert len(loaded.connections) == 120
    inputs = validate_scenario(load_config(path, {"scenario.n_vehicles": "20"}))
    assert len(inputs.routes.vehicles) == 20


def test_saved_grid_serializes_the_same(tmp_path, grid):
    save_network(grid, tmp_path / "net")

    loaded = load_network(tmp_path / "net")

    assert serialize_network(loaded) == serialize_network(grid)
    assert loaded.bounding_box == grid.bounding_box
