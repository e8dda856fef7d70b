"""CLI tests, driven in-process through main()."""

import json

import pytest

from riskalloc.cli import main

TINY = ["--n-mc", "4000", "--n", "200", "--seed", "3"]


def test_presets_lists_models(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "M1: d=3 copula=SurvivalClayton marginals=[GPD, GPD, GPD]" in out
    assert "M2" in out and "StudentTCopula" in out
    assert "M3: d=2" in out and "Pareto" in out


def test_allocate_gibbs_writes_artifacts(tmp_path, capsys):
    rc = main(
        ["allocate", "--model", "M1", "--event", "es", "--levels", "0.9",
         "--engine", "gibbs", *TINY, "--out", str(tmp_path)]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "engine=gibbs model=M1 event=es(0.9,) n=200 seed=3" in out
    assert out.count("  X") == 3 and "sum" in out
    for name in ("report.json", "samples.csv", "diagnostics.csv", "manifest.json"):
        assert (tmp_path / name).exists()


def test_allocate_measure_flag(tmp_path):
    rc = main(
        ["allocate", "--model", "M1", "--event", "es", "--levels", "0.9",
         "--measure", "es:0.9", *TINY, "--out", str(tmp_path)]
    )
    assert rc == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert [a["measure"] for a in doc["allocations"]] == ["es"] * 3
    assert all(a["levels"] == [0.9] for a in doc["allocations"])


def test_allocate_from_config_file(tmp_path, capsys):
    cfg = {
        "model": "M2",
        "event": {"kind": "es", "levels": [0.9]},
        "engine": "mc",
        "n_mc": 4000,
        "seed": 1,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    rc = main(["allocate", "--config", str(path), "--out", str(tmp_path / "out")])
    assert rc == 0
    assert "engine=mc model=M2" in capsys.readouterr().out
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["engine"] == "mc" and doc["seed"] == 1


def test_allocate_model_file(tmp_path):
    spec = {
        "marginals": [
            {"kind": "gpd", "params": [0.2, 1.0]},
            {"kind": "gpd", "params": [0.2, 1.0]},
        ],
        "copula": {"kind": "independence"},
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(spec))
    rc = main(
        ["allocate", "--model-file", str(path), "--event", "rvar",
         "--levels", "0.5,0.9", "--engine", "mc", "--n-mc", "4000"]
    )
    assert rc == 0


def test_allocate_incompatible_run_exits_2(capsys):
    rc = main(["allocate", "--model", "M1", "--event", "var", "--levels", "0.99", "--engine", "mc", *TINY])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_allocate_missing_event_exits():
    with pytest.raises(SystemExit, match="--event"):
        main(["allocate", "--model", "M1"])
    with pytest.raises(SystemExit, match="--levels"):
        main(["allocate", "--model", "M1", "--event", "es"])
    with pytest.raises(SystemExit, match="--model"):
        main(["allocate", "--event", "es", "--levels", "0.9"])


def test_allocate_bad_measure_exits():
    with pytest.raises(SystemExit, match="measure"):
        main(["allocate", "--model", "M1", "--event", "es", "--levels", "0.9",
              "--measure", "median", *TINY])


def test_tune_hmc_emits_params(tmp_path, capsys):
    rc = main(
        ["tune", "--model", "M1", "--event", "rvar", "--levels", "0.8,0.9",
         "--n-mc", "4000", "--seed", "1", "--out", str(tmp_path)]
    )
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["engine"] == "hmc"
    assert payload["eps"] > 0 and payload["T"] >= 1
    assert 0.0 <= payload["alpha_bar"] <= 1.0
    on_disk = json.loads((tmp_path / "tuned.json").read_text())
    assert on_disk == payload


def test_tune_gibbs_emits_params(capsys):
    rc = main(
        ["tune", "--engine", "gibbs", "--model", "M1", "--event", "es",
         "--levels", "0.9", "--n-mc", "4000", "--seed", "1"]
    )
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["engine"] == "gibbs"
    assert len(payload["p"]) == 3 and sum(payload["p"]) == pytest.approx(1.0)
    assert payload["thin_T"] >= 1


def test_compare_prints_table_and_csv(tmp_path, capsys):
    rc = main(
        ["compare", "--model", "M2", "--event", "es", "--levels", "0.9",
         "--engines", "mc,gibbs", *TINY, "--out", str(tmp_path)]
    )
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].split() == ["engine", "coord", "estimate", "bias", "se", "mse", "runtime"]
    assert sum(1 for ln in lines if ln.startswith("mc")) == 3
    assert sum(1 for ln in lines if ln.startswith("gibbs")) == 3
    csv_lines = (tmp_path / "comparison.csv").read_text().splitlines()
    assert csv_lines[0] == "engine,coordinate,estimate,bias,se,time_adjusted_mse,runtime"
    assert len(csv_lines) == 7
    # M2 is elliptical, so the bias column is populated
    assert csv_lines[1].split(",")[3] != ""
