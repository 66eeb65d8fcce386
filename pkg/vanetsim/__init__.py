from vanetsim.config import ScenarioConfig, load_config
from vanetsim.metrics import CounterSet, adr, pl_pct, rd_pct, summarize_sweep, tally
from vanetsim.road_network import RoadNetwork, load_network, parse_network
from vanetsim.sim_engine import RngStreams, StaticWorld, TraceBundle, run, validate_scenario
