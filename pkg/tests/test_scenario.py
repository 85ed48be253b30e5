import json
from pathlib import Path

import pytest

from pushcrowd.errors import ParseError, ValidationError
from pushcrowd.presets import PRESETS, get_preset
from pushcrowd.scenario import digest, dumps, loads, parse_scenario, write_scenario

PINS = json.loads((Path(__file__).parent / "preset_digests.json").read_text())

SMALL = """\
name = "small"

[geometry]
m = 16
targets = [{ id = 0, side = "right", start = 4, stop = 10 }]

[[geometry.obstacles]]
id = 3
rect = [8, 10, 0, 4]

[physics]
dt = 0.01

[[populations]]
id = 0
beta = [1.0]

[[populations.blobs]]
rect = [1, 4, 1, 4]
density = 1.0

[schedule]
n_steps = 10
"""


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    s = get_preset(name)
    assert loads(dumps(s)) == s


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_digest_is_pinned(name):
    assert digest(get_preset(name)) == PINS[name]


def test_file_round_trip(tmp_path):
    s = loads(SMALL)
    assert s.geometry.obstacles[0].id == 3 and s.schedule.snapshot_every == 1
    path = write_scenario(s, tmp_path / "s.toml")
    assert parse_scenario(path) == s


def errors_of(text):
    with pytest.raises(ValidationError) as info:
        loads(text)
    return info.value.errors


def test_dt_must_be_positive():
    text = SMALL.replace("dt = 0.01", "dt = 0")
    line = text.splitlines().index("dt = 0") + 1
    assert errors_of(text) == [f"line {line}: physics.dt: dt must be positive"]


def test_obstacle_over_target_names_both():
    errs = errors_of(SMALL.replace("rect = [8, 10, 0, 4]", "rect = [14, 16, 6, 8]"))
    assert len(errs) == 1 and "target 0" in errs[0] and "obstacle 3" in errs[0]


def test_unknown_key_has_line_number():
    text = SMALL.replace("n_steps = 10", "n_steps = 10\nbogus = 1")
    line = text.splitlines().index("bogus = 1") + 1
    assert errors_of(text) == [f"line {line}: schedule.bogus: unknown key"]


def test_type_errors_and_missing_tables():
    errs = errors_of(SMALL.replace("m = 16", 'm = "big"'))
    assert any("geometry.m" in e for e in errs)
    errs = errors_of(SMALL.replace("[schedule]\nn_steps = 10\n", ""))
    assert any("schedule" in e for e in errs)


def test_cross_reference_errors():
    errs = errors_of(SMALL.replace("beta = [1.0]", "beta = [1.0, 2.0]"))
    assert any("expected 1 entries" in e for e in errs)
    errs = errors_of(SMALL.replace("beta = [1.0]", "beta = [1.0]\ntargets = [7]"))
    assert any("unknown target id 7" in e for e in errs)
    errs = errors_of(SMALL.replace("rect = [1, 4, 1, 4]", "rect = [8, 10, 1, 3]"))
    assert any("blob covers obstacle cells" in e for e in errs)


def test_bad_toml_is_a_parse_error():
    with pytest.raises(ParseError):
        loads("name = ")


def test_non_utf8_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_bytes(b"\xff\xfe")
    with pytest.raises(ParseError):
        parse_scenario(p)


def test_unknown_preset():
    with pytest.raises(KeyError, match="unknown preset"):
        get_preset("nope")
