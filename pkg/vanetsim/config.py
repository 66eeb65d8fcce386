"""
Scenario configuration: a flat ``key = value`` file with ``#`` comments.

Keys are dotted by module (``mobility.tau_s``, ``mac.cw_min``, ...). Unknown
keys and unparsable values are errors naming the key. Relative paths are
resolved against the directory of the config file.
"""
import logging
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from vanetsim.errors import ConfigError
from vanetsim.mac_dcf import MacConfig
from vanetsim.mobility import MobilityConfig
from vanetsim.phy_channel import PhyConfig
from vanetsim.routing_aodv import AodvConfig
from vanetsim.traffic_app import AppConfig, parse_flow_pairs
from vanetsim.utils import parse_bool

LOG = logging.getLogger(__name__)

WORKERS_ENV = "VANETSIM_WORKERS"
DEFAULT_DURATION_S = 200.0
DEFAULT_SEED = 2


@dataclass(frozen=True)
class ScenarioConfig:
    net: Optional[Path] = None
    routes: Optional[str] = None
    turns: Optional[Path] = None
    n_vehicles: Optional[int] = None
    seed: int = DEFAULT_SEED
    duration: float = DEFAULT_DURATION_S
    signals_enabled: bool = True
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    aodv: AodvConfig = field(default_factory=AodvConfig)
    app: AppConfig = field(default_factory=AppConfig)

    @property
    def routes_path(self):
        """Route file with ``{n}`` replaced by the vehicle count."""
        if self.routes is None:
            return None
        if "{n}" in self.routes:
            if self.n_vehicles is None:
                raise ConfigError("scenario.routes", "uses {n} but scenario.n_vehicles is unset")
            return Path(self.routes.replace("{n}", str(self.n_vehicles)))

        return Path(self.routes)


def _us(text):
    return float(text) * 1e-6


# key -> (section, field name, converter); section None is the scenario itself
KEYS = {
    "scenario.net": (None, "net", Path),
    "scenario.routes": (None, "routes", str),
    "scenario.turns": (None, "turns", Path),
    "scenario.n_vehicles": (None, "n_vehicles", int),
    "scenario.seed": (None, "seed", int),
    "scenario.duration_s": (None, "duration", float),
    "scenario.signals_enabled": (None, "signals_enabled", parse_bool),
    "mobility.timestep_s": ("mobility", "timestep", float),
    "mobility.tau_s": ("mobility", "tau", float),
    "mobility.min_gap_m": ("mobility", "min_gap", float),
    "phy.pt_w": ("phy", "pt", float),
    "phy.freq_hz": ("phy", "frequency", float),
    "phy.rx_thresh_w": ("phy", "rx_thresh", float),
    "phy.cs_thresh_w": ("phy", "cs_thresh", float),
    "phy.ht_m": ("phy", "ht", float),
    "phy.hr_m": ("phy", "hr", float),
    "phy.gt": ("phy", "gt", float),
    "phy.gr": ("phy", "gr", float),
    "phy.sys_loss": ("phy", "sys_loss", float),
    "mac.cw_min": ("mac", "cw_min", int),
    "mac.cw_max": ("mac", "cw_max", int),
    "mac.retry_limit": ("mac", "retry_limit", int),
    "mac.slot_us": ("mac", "slot", _us),
    "mac.sifs_us": ("mac", "sifs", _us),
    "mac.difs_us": ("mac", "difs", _us),
    "mac.data_rate_bps": ("mac", "data_rate", float),
    "mac.basic_rate_bps": ("mac", "basic_rate", float),
    "mac.ifq_len": ("mac", "ifq_len", int),
    "aodv.active_route_timeout_s": ("aodv", "active_route_timeout", float),
    "aodv.rreq_retries": ("aodv", "rreq_retries", int),
    "aodv.ttl_start": ("aodv", "ttl_start", int),
    "aodv.buffer_per_dest": ("aodv", "buffer_per_dest", int),
    "aodv.node_traversal_time_s": ("aodv", "node_traversal_time", float),
    "aodv.net_diameter": ("aodv", "net_diameter", int),
    "aodv.ttl_increment": ("aodv", "ttl_increment", int),
    "aodv.ttl_threshold": ("aodv", "ttl_threshold", int),
    "aodv.broadcast_jitter_s": ("aodv", "broadcast_jitter", float),
    "app.packet_size_b": ("app", "packet_size", int),
    "app.rate_bps": ("app", "rate", float),
    "app.start_s": ("app", "start", float),
    "app.max_pkts": ("app", "max_packets", int),
    "app.flows": ("app", "flows", lambda text: tuple(parse_flow_pairs(text))),
}

_PATH_FIELDS = ("net", "routes", "turns")
SECTIONS = {
    "mobility": MobilityConfig,
    "phy": PhyConfig,
    "mac": MacConfig,
    "aodv": AodvConfig,
    "app": AppConfig,
}


def read_pairs(text, source="<config>"):
    """Yield ``(line_number, key, value)`` for every assignment in ``text``."""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(key.strip(), f"{source}:{number}: expected 'key = value'")
        yield number, key.strip(), value.strip()


def parse_config(text, base_dir=None, source="<config>", overrides=None) -> ScenarioConfig:
    values = {}
    for _number, key, value in read_pairs(text, source):
        values[key] = value
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    return build_config(values, base_dir)


def _blamed_key(section, message, given):
    """The key of ``section`` a validation message names, preferring keys the file set."""
    named = [key for key, (sec, name, _) in KEYS.items()
             if sec == section and re.search(rf"\b{name}\b", message)]
    for key in named:
        if key in given:
            return key
    return named[0] if named else section


def build_config(values, base_dir=None) -> ScenarioConfig:
    top, sections = {}, {name: {} for name in SECTIONS}
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        section, name, convert = KEYS[key]
        try:
            converted = convert(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {value!r}: {exc}") from None
        if name in _PATH_FIELDS and base_dir is not None and not Path(str(converted)).is_absolute():
            converted = type(converted)(Path(base_dir) / str(converted))
        (top if section is None else sections[section])[name] = converted

    if not top.get("duration", DEFAULT_DURATION_S) > 0:
        raise ConfigError("scenario.duration_s", "must be positive")
    if top.get("n_vehicles", 0) < 0:
        raise ConfigError("scenario.n_vehicles", "must not be negative")

    built = {}
    for section, kwargs in sections.items():
        try:
            built[section] = SECTIONS[section](**kwargs)
        except ValueError as exc:
            raise ConfigError(_blamed_key(section, str(exc), values), str(exc)) from None

    return ScenarioConfig(**top, **built)


def load_config(path, overrides=None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("scenario", f"cannot read {path}: {exc.strerror}") from None
    config = parse_config(text, path.parent, str(path), overrides)
    LOG.debug("loaded %s: seed %s, duration %s s", path, config.seed, config.duration)

    return config


def with_vehicles(config: ScenarioConfig, n_vehicles, seed=None) -> ScenarioConfig:
    return replace(config, n_vehicles=n_vehicles, seed=config.seed if seed is None else seed)


def worker_count(default=None):
    """Sweep worker count: ``VANETSIM_WORKERS`` wins over ``default``, else the CPU count."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"{env!r} is not an integer") from None
        if workers < 1:
            raise ConfigError(WORKERS_ENV, "must be at least 1")
        return workers
    if default is not None:
        return default

    return os.cpu_count() or 1
