import math

import pytest
import tomli
from hypothesis import given
from hypothesis import strategies as st

from photoalign.config import (
    AXIS_KEYS,
    UNITS,
    Axis,
    ConfigError,
    format_quantity,
    load_config,
    parse_config,
    parse_quantity,
)
from photoalign.model import CALIBRATED_GROUND


@pytest.mark.parametrize(
    "text, quantity, expected",
    [
        ("10 ns", "time", 10.0),
        ("2.5 us", "time", 2500.0),
        ("1.2 GHz", "energy", 1200.0),
        ("764 MHz", "energy", 764.0),
        ("5e2 W/cm2", "intensity", 500.0),
        ("1 kW/cm2", "intensity", 1000.0),
        ("1e4 W/m2", "intensity", 1.0),
        ("0.1 GHz/ns", "chirp", 100.0),
        ("0.1 mK", "temperature", 100.0),
        ("-3.5e1 MHz", "energy", -35.0),
        (".5 bohr", "length", 0.5),
        ("0.3 1/bohr", "inverse_length", 0.3),
    ],
)
def test_parse_quantity(text, quantity, expected):
    assert parse_quantity(text, quantity) == pytest.approx(expected, rel=1e-14)


def test_angstrom_conversion():
    assert parse_quantity("1 angstrom", "length") == pytest.approx(1.8897261246, rel=1e-9)
    assert parse_quantity("1 1/angstrom", "inverse_length") == pytest.approx(0.529177210903, rel=1e-9)


@pytest.mark.parametrize("raw", [10, 10.0, "10", "10 s", "ten ns", "", True, "1e999 ns"])
def test_parse_quantity_rejects(raw):
    with pytest.raises(ConfigError):
        parse_quantity(raw, "time", "pulse.sigma")


@given(st.sampled_from(sorted(UNITS)), st.floats(-1e12, 1e12, allow_nan=False))
def test_format_parse_round_trip(quantity, value):
    assert parse_quantity(format_quantity(value, quantity), quantity) == value


def test_defaults_and_unknown_keys():
    cfg = parse_config({})
    assert cfg["pulse.sigma"] == 10.0 and cfg["pulse.intensity"] == 1000.0
    assert cfg["ensemble.temperature"] == 100.0
    assert cfg.ground_curve() is CALIBRATED_GROUND
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config({"pulses": {}})
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"pulse": {"width": "10 ns"}})
    with pytest.raises(ConfigError, match="unit suffix"):
        parse_config({"pulse": {"sigma": 10}})
    with pytest.raises(ConfigError):
        parse_config({"pulse": {"sigma": "0 ns"}})
    with pytest.raises(ConfigError):
        parse_config({"basis": {"j_max": 2.5}})
    with pytest.raises(ConfigError):
        parse_config({"potential": {"ground": "file"}})


def test_toml_round_trip_and_hash(tmp_path):
    text = """
[pulse]
intensity = "0.5 kW/cm2"
sigma = "10 ns"
chirp = "100 MHz/ns"

[train]
n_pulses = 2
delay = "52 ns"

[basis]
j_max = 3

[sweep]
workers = 3
outputs = ["final_population"]

[[sweep.axis]]
name = "delay"
start = "50 ns"
stop = "51 ns"
step = "0.1 ns"
"""
    path = tmp_path / "run.toml"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg["pulse.intensity"] == 500.0
    assert cfg.axes[0].values == tuple(round(50 + 0.1 * k, 10) for k in range(11))
    again = parse_config(tomli.loads(cfg.to_toml()))
    assert again == cfg
    assert again.hash == cfg.hash
    # worker count is not physics
    assert cfg.hash == parse_config(tomli.loads(text.replace("workers = 3", "workers = 1"))).hash
    assert cfg.hash != cfg.replace(**{"pulse.sigma": 7.0}).hash


def test_sweep_section_errors():
    base = {"sweep": {"axis": [{"name": "intensity", "values": ["100 W/cm2"]}]}}
    assert parse_config(base).axes[0].name == "pulse.intensity"
    bad = [
        {"sweep": {}},
        {"sweep": {"axis": [{"name": "mass", "values": ["1 amu"]}]}},
        {"sweep": {"axis": [{"name": "sigma", "values": ["1 ns"], "start": "1 ns"}]}},
        {"sweep": {"axis": [{"name": "sigma", "start": "1 ns", "stop": "2 ns"}]}},
        {"sweep": {"axis": [{"name": "sigma", "start": "1 ns", "stop": "2 ns", "step": "0 ns"}]}},
        {"sweep": {"axis": [{"name": "sigma", "values": []}]}},
        {"sweep": {"axis": [{"name": "sigma", "values": ["1 ns"]}, {"name": "sigma", "values": ["2 ns"]}]}},
        {"sweep": {"axis": [{"name": "sigma", "values": ["1 ns"]}], "workers": 0}},
        {"sweep": {"axis": [{"name": "sigma", "values": ["1 ns"]}], "outputs": ["nope"]}},
    ]
    for data in bad:
        with pytest.raises(ConfigError):
            parse_config(data)


def test_axis_sorted_unique_and_integer_ranges():
    ax = Axis("pulse.sigma", (7.0, 3.0, 7.0, 10.0))
    assert ax.values == (3.0, 7.0, 10.0) and ax.short == "sigma"
    cfg = parse_config({"sweep": {"axis": [{"name": "n_pulses", "start": 2, "stop": 4, "step": 1}]}})
    assert cfg.axes[0].values == (2, 3, 4)
    with pytest.raises(ConfigError):
        Axis("pulse.sigma", (math.inf,))
    assert set(AXIS_KEYS) >= {"intensity", "sigma", "chirp", "delay", "n_pulses"}


def test_physics_objects():
    cfg = parse_config({"pulse": {"chirp": "100 MHz/ns"}, "train": {"n_pulses": 3, "delay": "60 ns"}})
    pulses = cfg.pulses()
    assert [p.center_ns for p in pulses] == [0.0, 60.0, 120.0]
    assert pulses[0].chirp_mhz_per_ns == 100.0
    assert cfg.model_spec().j_max == 5
    with pytest.raises(ConfigError, match="only 'eigen'"):
        parse_config({"potential": {"ground": "harmonic"}}).model_spec()
    with pytest.raises(ConfigError, match="not found"):
        parse_config({"potential": {"ground": "file", "ground_file": "missing.dat"}}).ground_curve()


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[pulse\n")
    with pytest.raises(ConfigError):
        load_config(bad)
