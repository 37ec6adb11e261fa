import csv
import json

import numpy as np
import pytest
import yaml

from polarwz import verify
from polarwz.__main__ import main
from polarwz.errors import CacheMissError
from polarwz.harness import (CSV_COLUMNS, SWEEP_COLUMNS, ConfigError, cmd_construct, cmd_run, cmd_sweep,
                             codebook_from_dict, codebook_to_dict, load_config, read_cache)

TINY = {"n": 16, "schedule": [2.0, 4.0, 8.0, 12.0], "ell": 7, "sigma_x2": 16.0, "delta": 1.0,
        "sigma_z2": [3.0], "mc_samples": 20, "z_low": 1.0e-3, "prior_gate": False, "trials": 3, "seed": 1}


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


# ---------------------------------------------------------------- config

def test_defaults_and_overrides(tiny):
    cfg = load_config(tiny, seed=9, trials=None)
    assert cfg.seed == 9 and cfg.trials == 3
    assert cfg.guess_schedule.r == 3
    assert load_config().m == 16 * 12


@pytest.mark.parametrize("bad", [{"n": 12}, {"nope": 1}, {"delta": 20.0}, {"z_low": 0.9, "z_high": 0.5},
                                 {"trials": -1}, {"schedule": [4.0, 2.0]}, {"hash_m": 0}])
def test_config_errors(tmp_path, bad):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({**TINY, **bad}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")


def test_digest_tracks_code_fields_only(tiny):
    a = load_config(tiny)
    assert a.digest() == load_config(tiny, trials=50, sigma_z2=[5.0]).digest()
    assert a.digest() != load_config(tiny, mc_samples=21).digest()


# ----------------------------------------------------------------- cache

def test_cache_has_one_record_per_round_and_level(tiny, tmp_path):
    cfg = load_config(tiny)
    cmd_construct(cfg, tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["version"] == 1 and doc["digest"] == cfg.digest()
    assert len(doc["records"]) == 21


def test_cache_round_trip(tiny, tmp_path):
    cfg = load_config(tiny)
    code = cmd_construct(cfg, tmp_path / "c.json")
    back = read_cache(tmp_path / "c.json", cfg)
    again = codebook_from_dict(codebook_to_dict(back, cfg.digest()))
    for a, b, c in zip(code.rounds, back.rounds, again.rounds):
        assert np.array_equal(a.sets.f1, b.sets.f1) and np.array_equal(a.sets.i2, c.sets.i2)
        assert np.array_equal(a.z_y, b.z_y)
        assert a.redecode.keys() == b.redecode.keys()
        assert all(np.array_equal(a.redecode[p], b.redecode[p]) for p in a.redecode)


def test_rebuild_is_byte_identical_and_idempotent(tiny, tmp_path):
    cfg = load_config(tiny)
    cmd_construct(cfg, tmp_path / "a.json")
    cmd_construct(cfg, tmp_path / "b.json")
    first = (tmp_path / "a.json").read_bytes()
    assert first == (tmp_path / "b.json").read_bytes()
    mtime = (tmp_path / "a.json").stat().st_mtime_ns
    cmd_construct(cfg, tmp_path / "a.json")
    assert (tmp_path / "a.json").stat().st_mtime_ns == mtime


def test_cache_miss_explains_how_to_fix(tiny, tmp_path):
    cfg = load_config(tiny)
    with pytest.raises(CacheMissError, match="construct"):
        read_cache(tmp_path / "none.json", cfg)
    cmd_construct(cfg, tmp_path / "c.json")
    with pytest.raises(CacheMissError, match="construct"):
        read_cache(tmp_path / "c.json", load_config(tiny, seed=2))


# ------------------------------------------------------------------ runs

def test_zero_trials_gives_header_only_csv(tiny, tmp_path):
    cfg = load_config(tiny, trials=0)
    cmd_construct(cfg, tmp_path / "c.json")
    assert cmd_run(cfg, tmp_path / "c.json", tmp_path / "r.csv") == []
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows == [list(CSV_COLUMNS)]


def test_run_rows_and_summary(tiny, tmp_path):
    cfg = load_config(tiny)
    cmd_construct(cfg, tmp_path / "c.json")
    results = cmd_run(cfg, tmp_path / "c.json", tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == len(results) == 3
    assert [int(r["trial"]) for r in rows] == [0, 1, 2]
    summary = json.loads((tmp_path / "r.summary.json").read_text())
    assert summary["3.0"]["trials"] == 3


def test_threads_do_not_change_results(tiny, tmp_path):
    cfg = load_config(tiny)
    cmd_construct(cfg, tmp_path / "c.json")
    one = cmd_run(cfg, tmp_path / "c.json", tmp_path / "a.csv")
    two = cmd_run(load_config(tiny, threads=2), tmp_path / "c.json", tmp_path / "b.csv")
    assert [r.row() for r in one] == [r.row() for r in two]


def test_sweep_warns_outside_interval_and_plots(tiny, tmp_path):
    pytest.importorskip("matplotlib")
    cfg = load_config(tiny, sigma_z2=[3.0, 14.0], trials=2)
    cmd_construct(cfg, tmp_path / "c.json")
    with pytest.warns(UserWarning, match="outside"):
        rows = cmd_sweep(cfg, tmp_path / "c.json", tmp_path / "s.csv", plot=tmp_path / "s.png")
    assert [r["sigma_z2"] for r in rows] == [3.0, 14.0]
    assert next(csv.reader(open(tmp_path / "s.csv"))) == list(SWEEP_COLUMNS)
    assert (tmp_path / "s.png").stat().st_size > 0


# ------------------------------------------------------------------- CLI

def test_cli_exit_codes(tiny, tmp_path, capsys):
    cache = str(tmp_path / "c.json")
    assert main(["construct", "--config", str(tiny), "--out", cache]) == 0
    assert main(["run", "--config", str(tiny), "--cache", cache, "--out", str(tmp_path / "r.csv")]) == 0
    assert main(["--seed", "5", "run", "--config", str(tiny), "--cache", cache,
                 "--out", str(tmp_path / "r.csv")]) == 2
    assert main(["construct", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_verify_filters_suites(capsys):
    assert main(["verify", "--suite", "mi-identity"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert all(line.startswith("PASS  mi-identity") for line in out[:-1])
    assert out[-1] == "2/2 checks passed"


def test_cli_verify_failure_exit_code(monkeypatch):
    monkeypatch.setitem(verify.SUITES, "mi-identity",
                        lambda seed: [verify.Check("mi-identity", "forced", False)])
    assert main(["verify", "--suite", "mi-identity"]) == 1


def test_cli_verify_is_deterministic(capsys):
    main(["--seed", "3", "verify", "--suite", "mmse-identity", "--suite", "dg-sampler"])
    first = capsys.readouterr().out
    main(["--seed", "3", "verify", "--suite", "mmse-identity", "--suite", "dg-sampler"])
    assert capsys.readouterr().out == first


def test_sc_oracle_suite_is_small_blocks_only():
    assert max(n for n, _ in verify.oracle_shapes(16, max_n=8)) == 8


def test_unknown_suite_rejected():
    with pytest.raises(KeyError):
        verify.run_suites(["nope"])
    with pytest.raises(SystemExit):
        main(["verify", "--suite", "nope"])
