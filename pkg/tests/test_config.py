from pathlib import Path

import pytest

from vanetsim.config import (
    ScenarioConfig,
    load_config,
    parse_config,
    read_pairs,
    with_vehicles,
    worker_count,
)
from vanetsim.errors import ConfigError

CONFIG = """\
# density sweep on the grid
scenario.net = net
scenario.routes = routes_{n}.xml
scenario.duration_s = 120   # shorter than the default
scenario.signals_enabled = no

mac.slot_us = 9
mac.cw_min = 15
aodv.rreq_retries = 3
app.flows = v0:v5, v2:v7
"""


def test_defaults():
    config = parse_config("")

    assert config == ScenarioConfig()
    assert (config.seed, config.duration, config.signals_enabled) == (2, 200.0, True)
    assert config.routes_path is None


def test_full_config(tmp_path):
    config = parse_config(CONFIG, base_dir=tmp_path)

    assert config.net == tmp_path / "net"
    assert config.duration == 120.0
    assert config.signals_enabled is False
    assert config.mac.slot == pytest.approx(9e-6)
    assert config.mac.cw_min == 15
    assert config.aodv.rreq_retries == 3
    assert config.app.flows == (("v0", "v5"), ("v2", "v7"))


def test_read_pairs_skips_comments_and_blanks():
    pairs = list(read_pairs("# header\n\na = 1  # note\nb=two\n"))

    assert pairs == [(3, "a", "1"), (4, "b", "two")]


class TestErrors:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key") as exc_info:
            parse_config("mac.cw = 3\n")

        assert exc_info.value.key == "mac.cw"

    def test_bad_value_names_the_key(self):
        with pytest.raises(ConfigError, match="'mac.cw_min'"):
            parse_config("mac.cw_min = wide\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match="cfg:2: expected 'key = value'"):
            parse_config("scenario.seed = 4\njunk\n", source="cfg")

    @pytest.mark.parametrize("text, key", [
        ("mac.cw_min = 64\nmac.cw_max = 32\n", "mac.cw_min"),
        ("mac.cw_max = 8\n", "mac.cw_max"),
        ("mac.ifq_len = 0\n", "mac.ifq_len"),
        ("mobility.tau_s = 0\n", "mobility.tau_s"),
        ("aodv.rreq_retries = -1\n", "aodv.rreq_retries"),
    ])
    def test_section_constraints_name_the_key(self, text, key):
        with pytest.raises(ConfigError) as exc_info:
            parse_config(text)

        assert exc_info.value.key == key
        assert str(exc_info.value).startswith(f"config key {key!r}: ")

    @pytest.mark.parametrize("text, key", [
        ("scenario.duration_s = 0", "scenario.duration_s"),
        ("scenario.n_vehicles = -1", "scenario.n_vehicles"),
        ("scenario.signals_enabled = maybe", "scenario.signals_enabled"),
        ("app.flows = v0", "app.flows"),
    ])
    def test_invalid_values(self, text, key):
        with pytest.raises(ConfigError) as exc_info:
            parse_config(text)

        assert exc_info.value.key == key

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.cfg")


#
# Files and overrides
#
def test_load_config_resolves_paths_next_to_the_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(CONFIG, encoding="utf-8")

    config = load_config(path, {"scenario.n_vehicles": "30", "scenario.turns": None})

    assert config.routes_path == tmp_path / "routes_30.xml"
    assert config.turns is None


def test_absolute_override_wins(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(CONFIG, encoding="utf-8")
    other = Path("/srv/maps/net").absolute()

    config = load_config(path, {"scenario.net": str(other)})

    assert config.net == other


def test_routes_template_needs_a_count():
    config = ScenarioConfig(routes="routes_{n}.xml")

    with pytest.raises(ConfigError, match="n_vehicles"):
        config.routes_path


def test_with_vehicles():
    config = with_vehicles(ScenarioConfig(seed=2), 40, seed=8)

    assert (config.n_vehicles, config.seed) == (40, 8)
    assert with_vehicles(config, 50).seed == 8


class TestWorkerCount:
    def test_environment_wins(self, monkeypatch):
        monkeypatch.setenv("VANETSIM_WORKERS", "3")

        assert worker_count(8) == 3

    def test_default(self, monkeypatch):
        monkeypatch.delenv("VANETSIM_WORKERS", raising=False)

        assert worker_count(2) == 2
        assert worker_count() >= 1

    @pytest.mark.parametrize("value", ["many", "0"])
    def test_bad_environment(self, monkeypatch, value):
        monkeypatch.setenv("VANETSIM_WORKERS", value)

        with pytest.raises(ConfigError):
            worker_count()
