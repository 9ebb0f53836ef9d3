import json

import pytest
from hypothesis import given, settings, strategies as st

from poissoncdo.config import ConfigError, dump_config, load_config, parse_config, to_dict
from poissoncdo.model import STANDARD_TRANCHES

MINIMAL = '{"model": {"rho": 0.05, "mu": 0.1}}'


def test_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.altered == cfg.real
    assert cfg.tranches == STANDARD_TRANCHES
    assert cfg.real.lam == pytest.approx(10.0)


def test_canonical_round_trip():
    cfg = parse_config(MINIMAL)
    text = dump_config(cfg)
    assert parse_config(text) == cfg
    assert dump_config(parse_config(text)) == text


@settings(max_examples=40)
@given(rho=st.floats(1e-3, 5.0), mu=st.floats(1e-3, 2.0), alt=st.booleans(),
       seed=st.integers(0, 2 ** 64 - 1), paths=st.integers(1, 10 ** 7),
       tranches=st.lists(st.tuples(st.floats(0, 0.99), st.floats(0, 1)), max_size=4))
def test_round_trip_property(rho, mu, alt, seed, paths, tranches):
    doc = {"model": {"rho": rho, "mu": mu}, "mc": {"paths": paths, "seed": seed},
           "tranches": [sorted(t) for t in tranches if sorted(t)[0] < 1]}
    if alt:
        doc["altered"] = {"rho": 2 * rho, "lam": 1 / mu}
    cfg = parse_config(json.dumps(doc))
    assert parse_config(dump_config(cfg)) == cfg


def test_lam_and_mu_are_exclusive():
    with pytest.raises(ConfigError):
        parse_config('{"model": {"rho": 0.05, "mu": 0.1, "lam": 10}}')
    with pytest.raises(ConfigError):
        parse_config('{"model": {"rho": 0.05}}')


@pytest.mark.parametrize("text, line, where", [
    ('{\n  "model": {\n    "rho": -0.05,\n    "mu": 0.1}\n}', 3, "model.rho"),
    ('{\n  "model": {"rho": 0.05, "mu": 0.1},\n  "mc": {\n    "paths": "many"\n  }\n}', 4, "mc.paths"),
    ('{\n  "model": {"rho": 0.05, "mu": 0.1},\n  "tranches": [\n    [0, 0.03],\n    [0.5, 0.2]\n  ]\n}',
     5, "tranches[1]"),
    ('{\n  "model": {"rho": 0.05, "mu": 0.1},\n  "bogus": 1\n}', 1, "<root>"),
])
def test_errors_name_the_line(text, line, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.json")
    assert str(exc.value).startswith(f"run.json:{line}: {where}")


def test_invalid_json_line():
    with pytest.raises(ConfigError, match=r"^x:2: invalid JSON"):
        parse_config('{"model":\n  {"rho": 0.05,, }}', "x")


def test_timing_coefficients_come_in_pairs():
    with pytest.raises(ConfigError):
        parse_config('{"model": {"rho": 0.05, "mu": 0.1}, "timing": {"c": 0.1}}')
    cfg = parse_config('{"model": {"rho": 0.05, "mu": 0.1}, "timing": {"c": 0.1, "b": 1}}')
    assert to_dict(cfg)["timing"]["b"] == 1


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "nope.json"))


def test_empty_tranche_list_allowed():
    assert parse_config('{"model": {"rho": 0.05, "mu": 0.1}, "tranches": []}').tranches == ()
