"""
Synthetic signalized grid: the reference map for density sweeps.

``blocks x blocks`` traffic-light intersections ``block_length`` apart,
each border intersection extended by a priority fringe node on every
open side. Fringe nodes allow U-turns so traffic stays on the map.
The default 200 m blocks give an 800 m x 800 m map. With 400 m blocks a
250 m radio leaves sparse runs split into islands.
"""
import logging
from pathlib import Path
from typing import List, Sequence
from xml.etree import ElementTree as ET

import numpy as np

from vanetsim.constants import VEHICLE_COUNTS, VEHICLE_TYPES
from vanetsim.mobility import Route
from vanetsim.road_network import (EdgeSpec, NodeKind, NodeSpec, Point2D, RoadNetwork,
                                   build_network, save_network)
from vanetsim.utils import distance, format_float

LOG = logging.getLogger(__name__)

SCENARIO_FILE = "scenario.cfg"
NETWORK_DIR = "net"


def _node_id(a, b):
    return f"n{a}_{b}"


def build_grid(blocks=3, block_length=200.0, lanes=2, speed=40.0, priority=75.0) -> RoadNetwork:
    if blocks < 1:
        raise ValueError(f"blocks must be at least 1, got {blocks}")
    size = blocks + 1

    def inner(i):
        return 1 <= i <= blocks

    nodes = {}
    for a in range(size + 1):
        for b in range(size + 1):
            if inner(a) and inner(b):
                kind = NodeKind.TRAFFIC_LIGHT
            elif inner(a) != inner(b) and (a in (0, size) or b in (0, size)):
                kind = NodeKind.PRIORITY
            else:
                continue
            node_id = _node_id(a, b)
            nodes[node_id] = NodeSpec(node_id, Point2D(a * block_length, b * block_length), kind)

    edges = {}
    for a in range(size + 1):
        for b in range(size + 1):
            for da, db in ((1, 0), (0, 1)):
                u, v = _node_id(a, b), _node_id(a + da, b + db)
                if u not in nodes or v not in nodes:
                    continue
                if nodes[u].kind is NodeKind.PRIORITY and nodes[v].kind is NodeKind.PRIORITY:
                    continue
                length = distance(nodes[u].position, nodes[v].position)
                for x, y in ((u, v), (v, u)):
                    edge_id = f"{x}-{y}"
                    edges[edge_id] = EdgeSpec(edge_id, x, y, lanes, speed, priority, length)

    pairs = []
    for into in edges.values():
        for out in edges.values():
            if out.from_node != into.to_node:
                continue
            u_turn = out.to_node == into.from_node
            fringe = nodes[into.to_node].kind is NodeKind.PRIORITY
            if u_turn == fringe:
                pairs.append((into.id, out.id))
    LOG.debug("grid %dx%d: %d nodes, %d edges, %d connections", blocks, blocks, len(nodes),
              len(edges), len(pairs))

    return build_network(nodes, edges, pairs)


def grid_routes(network: RoadNetwork, n_routes=36, route_length=16, seed=1) -> List[Route]:
    """Random walks of ``route_length`` edges, each entering the grid from a fringe node."""
    rng = np.random.default_rng(seed)
    entries = sorted(e.id for e in network.edges.values()
                     if network.nodes[e.from_node].kind is NodeKind.PRIORITY)
    if not entries:
        raise ValueError("network has no fringe entry edges")
    routes = []
    for i in range(n_routes):
        edges = [entries[int(rng.integers(len(entries)))]]
        while len(edges) < route_length:
            options = network.outgoing(edges[-1])
            if not options:
                break
            edges.append(options[int(rng.integers(len(options)))].to_edge)
        routes.append(Route(f"r{i}", tuple(edges)))

    return routes


def route_document(network: RoadNetwork, routes: Sequence[Route], n_vehicles, seed,
                   depart_window=(0.0, 50.0)) -> str:
    """Route file text: vehicle types cycle through the presets, routes and departures are random."""
    rng = np.random.default_rng(seed)
    type_ids = list(VEHICLE_TYPES)
    root = ET.Element("routes")
    for route in routes:
        ET.SubElement(root, "route", id=route.id, edges=" ".join(route.edges))
    first, last = depart_window
    for i in range(n_vehicles):
        route = routes[int(rng.integers(len(routes)))]
        depart = format_float(float(rng.uniform(first, last)), 1)
        ET.SubElement(root, "vehicle", id=f"v{i}", type=type_ids[i % len(type_ids)],
                      route=route.id, depart=depart)
    ET.indent(root)

    return ET.tostring(root, encoding="unicode") + "\n"


def scenario_template(duration=200.0):
    return "\n".join([
        "# synthetic grid, one route file per vehicle count",
        f"scenario.net = {NETWORK_DIR}",
        "scenario.routes = routes_{n}.xml",
        f"scenario.duration_s = {duration:g}",
        "",
    ])


def write_grid_scenario(directory, counts: Sequence[int] = VEHICLE_COUNTS, seed=1,
                        block_length=200.0):
    directory = Path(directory)
    network = build_grid(block_length=block_length)
    save_network(network, directory / NETWORK_DIR)
    routes = grid_routes(network, seed=seed)
    for n in counts:
        (directory / f"routes_{n}.xml").write_text(route_document(network, routes, n, seed + n),
                                                   encoding="utf-8")
    path = directory / SCENARIO_FILE
    path.write_text(scenario_template(), encoding="utf-8")
    LOG.info("grid scenario written to %s", directory)

    return path
