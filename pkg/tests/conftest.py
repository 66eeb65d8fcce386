import math

import numpy as np
import pytest

from vanetsim.config import ScenarioConfig
from vanetsim.events import EventQueue
from vanetsim.phy_channel import PhyConfig
from vanetsim.road_network import Point2D, parse_network
from vanetsim.traffic_app import AppConfig

#
# A four-approach cross: centre "c" with a traffic light, arms of 200 m
#
CROSS_NODES = """<nodes>
  <node id="c" x="200" y="200" type="traffic_light"/>
  <node id="n" x="200" y="400"/>
  <node id="s" x="200" y="0"/>
  <node id="e" x="400" y="200"/>
  <node id="w" x="0" y="200"/>
</nodes>
"""

CROSS_EDGES = """<edges>
  <edge id="wc" from="w" to="c" numLanes="2" speed="13.9" priority="75"/>
  <edge id="cw" from="c" to="w" numLanes="2" speed="13.9" priority="75"/>
  <edge id="ec" from="e" to="c" numLanes="2" speed="13.9" priority="75"/>
  <edge id="ce" from="c" to="e" numLanes="2" speed="13.9" priority="75"/>
  <edge id="nc" from="n" to="c" numLanes="2" speed="13.9" priority="75"/>
  <edge id="cn" from="c" to="n" numLanes="2" speed="13.9" priority="75"/>
  <edge id="sc" from="s" to="c" numLanes="2" speed="13.9" priority="75"/>
  <edge id="cs" from="c" to="s" numLanes="2" speed="13.9" priority="75"/>
</edges>
"""

CROSS_CONNECTIONS = """<connections>
  <connection from="wc" to="cn"/>
  <connection from="wc" to="ce"/>
  <connection from="wc" to="cs"/>
  <connection from="ec" to="cn"/>
  <connection from="ec" to="cw"/>
  <connection from="ec" to="cs"/>
  <connection from="nc" to="ce"/>
  <connection from="nc" to="cs"/>
  <connection from="nc" to="cw"/>
  <connection from="sc" to="cn"/>
  <connection from="sc" to="ce"/>
  <connection from="sc" to="cw"/>
</connections>
"""


@pytest.fixture
def cross_docs():
    return CROSS_NODES, CROSS_EDGES, CROSS_CONNECTIONS


@pytest.fixture
def cross_network(cross_docs):
    return parse_network(*cross_docs)


@pytest.fixture
def phy():
    return PhyConfig()


@pytest.fixture
def clock():
    return EventQueue()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


#
# Static placements
#
def line_positions(n, spacing=200.0):
    return {f"n{i}": Point2D(i * spacing, 0.0) for i in range(n)}


def ring_positions(n=6, side=200.0):
    # regular polygon: circumradius equals the side for a hexagon
    radius = side / (2 * math.sin(math.pi / n))
    return {f"n{i}": Point2D(300 + radius * math.cos(2 * math.pi * i / n),
                             300 + radius * math.sin(2 * math.pi * i / n))
            for i in range(n)}


def grid_positions(rows=2, cols=4, spacing=200.0):
    return {f"n{r * cols + c}": Point2D(c * spacing, r * spacing)
            for r in range(rows) for c in range(cols)}


@pytest.fixture
def make_scenario():
    def _make_scenario(flows=(), duration=5.0, start=1.0, seed=2, **app):
        return ScenarioConfig(seed=seed, duration=duration,
                              app=AppConfig(start=start, flows=tuple(flows), **app))

    return _make_scenario
