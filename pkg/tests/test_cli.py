import json

import pytest

from poissoncdo.cli import main


def write(tmp_path, doc):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


SMALL = {"model": {"rho": 0.05, "mu": 0.1}, "mc": {"paths": 20000, "seed": 5},
         "sweep": {"axis": "mu_alt", "values": [0.1, 0.28]},
         "map": {"rho_ratios": [1, 2], "mu_ratios": [1, 2, 3], "paths": 5000},
         "timing": {"rho_values": [0.05, 0.5, 1.0], "paths": 20000, "repeats": 1}}


def test_price_index_spread(capsys):
    assert main(["price"]) == 0
    index = [l for l in capsys.readouterr().out.splitlines() if l.strip().startswith("0.00-1.00")][0]
    assert index.split()[-1] == "45.4545"


def test_price_empty_tranches(tmp_path, capsys):
    assert main(["price", "--config", write(tmp_path, {**SMALL, "tranches": []})]) == 0
    assert capsys.readouterr().out.strip().startswith("tranche")


def test_config_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, {"model": {"rho": "x", "mu": 0.1}})
    assert main(["price", "--config", path]) == 2
    assert f"{path}:3: model.rho" in capsys.readouterr().err


def test_bad_override_is_config_error():
    assert main(["simulate", "--paths", "0"]) == 2


def test_simulate_divergent(tmp_path, capsys):
    doc = {**SMALL, "altered": {"rho": 0.05, "mu": 0.04}}
    path = write(tmp_path, doc)
    assert main(["simulate", "--config", path]) == 0
    assert "infinite variance" in capsys.readouterr().err
    assert main(["simulate", "--config", path, "--strict-divergence"]) == 4


def test_simulate_writes_provenance(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--config", write(tmp_path, SMALL), "--out", str(out),
                 "--seed", "77", "--format", "csv"]) == 0
    text = (out / "simulate.csv").read_text()
    assert "# seed 77" in text and "# n_paths 20000" in text and "def_mean_bp" in text


def test_sweep_map_timing_files(tmp_path, capsys):
    out = tmp_path / "o"
    path = write(tmp_path, SMALL)
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    assert main(["timing", "--config", path, "--out", str(out)]) == 0
    assert main(["map", "--config", path, "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"sweep_mu_alt_0.30-1.00.tsv", "timing.tsv", "optima.tsv",
            "map_g_num_0.30-1.00.tsv", "map_g_time_0.00-1.00.tsv"} <= names
    assert "r2=" in (out / "timing.tsv").read_text()


def test_validate_exit_codes(capsys):
    assert main(["validate"]) == 0
    assert main(["validate", "--tolerance-scale", "0"]) == 3
    out = capsys.readouterr().out
    assert "16/16 checks passed" in out and "0/16 checks passed" in out


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
