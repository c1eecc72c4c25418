import csv
import json

import numpy as np
import pytest

from dnls_orbit.harness.cli import main
from dnls_orbit.harness.config import (
    ConfigError,
    RunConfig,
    initial_field,
    load_config,
    perturbation,
    preset,
    save_config,
)
from dnls_orbit.harness.experiments import DRIFT_CSV_COLUMNS, SNAPSHOT_COLUMNS, run
from dnls_orbit.harness.plots import emit_plots, plots_from_directory
from dnls_orbit.harness.sweep import SWEEP_COLUMNS, expand_grid, sweep
from dnls_orbit.harness.validate import is_stable, validate
from dnls_orbit.lattice import GridSpec, norm_mu

SMALL = dict(h=0.3, K=20, t_end=2.0, cadence=10)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_presets():
    e1, e2, e3 = preset("E1"), preset("E2"), preset("E3")
    for p in (e1, e2, e3):
        assert p.h == 0.1875 and p.K == 80 and p.K * p.h == pytest.approx(15)
    assert (e1.kind, e1.tau, e1.t_end) == ("lie_AP", 0.2, 300.0)
    assert (e2.kind, e2.tau) == ("taylor2_then_P", 0.001)
    assert (e3.kind, e3.tau) == ("lie_AP", 0.02)
    assert e1.snapshot_times == (0, 50, 100, 200) and e3.snapshot_times == (0, 100, 1000, 10000)
    assert preset("e3", full=True).t_end == 1e6
    with pytest.raises(ConfigError):
        preset("E4")
    with pytest.raises(ConfigError):
        preset("E1", full=True)


@pytest.mark.parametrize("bad", [dict(tau=-1.0), dict(delta=-0.1, initial="perturbed"),
                                 dict(cadence=0), dict(kind="rk4"), dict(delta=0.1),
                                 dict(K=0)])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig(**bad)


def test_config_file_roundtrip_and_overrides(tmp_path):
    cfg = RunConfig(name="x", tau=0.01, initial="perturbed", delta=0.1, seed=7)
    path = save_config(cfg, tmp_path / "c.json")
    assert load_config(path) == cfg
    (tmp_path / "partial.json").write_text(json.dumps({"tau": 0.005}))
    loaded = load_config(tmp_path / "partial.json", preset("E3"))
    assert loaded.tau == 0.005 and loaded.name == "E3"
    (tmp_path / "bad.json").write_text(json.dumps({"tau": 0.01, "bogus": 1}))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        cfg.updated(nonsense=3)


def test_perturbation_model():
    g = GridSpec(0.3, 20)
    w = perturbation(g, 3)
    assert w.symmetric and norm_mu(w) == pytest.approx(1.0)
    assert np.array_equal(w.values, perturbation(g, 3).values)
    assert not np.array_equal(w.values, perturbation(g, 4).values)
    lp = perturbation(g, 3, lowpass_omega=2.0)
    from dnls_orbit.lattice import dst_forward
    c = dst_forward(lp).coeffs
    assert np.abs(c[g.frequencies > 2.0]).max() < 1e-13
    cfg = RunConfig(**SMALL, initial="perturbed", delta=0.05, seed=3)
    f = initial_field(cfg)
    base = initial_field(RunConfig(**SMALL))
    assert norm_mu(f - base) == pytest.approx(0.05)


def test_run_outputs_and_reproducibility(tmp_path):
    cfg = RunConfig(**SMALL, initial="perturbed", delta=0.05, seed=1, tau=0.01,
                    snapshot_times=(0.0, 1.0), output_dir=str(tmp_path / "a"), emit_plots=True)
    res = run(cfg)
    assert res.exit_code == 0
    out = tmp_path / "a"
    rows = read_csv(out / "drift.csv")
    assert tuple(rows[0]) == DRIFT_CSV_COLUMNS
    assert len(rows) == len(res.record.reports) + 1
    assert all(np.isfinite(float(x)) for x in rows[-1])
    snap = read_csv(out / "snapshot_t1.csv")
    assert tuple(snap[0]) == SNAPSHOT_COLUMNS and len(snap) == 42
    assert read_csv(out / "energy_drift.csv")[0] == ["step", "t", "N_h", "H_h", "H_mod", "dN", "dH", "dHmod"]
    m = json.loads((out / "manifest.json").read_text())
    for key in ("config", "version", "cfl", "epsilon_mu", "status", "instability_time"):
        assert key in m
    assert sorted(m["plots"]) == ["distance.svg", "drift.svg", "profiles.svg"]
    # the manifest alone is enough to rerun the exact configuration
    cfg2 = RunConfig(**{**m["config"], "output_dir": str(tmp_path / "b")})
    run(cfg2)
    for name in ("drift.csv", "energy_drift.csv", "snapshot_t0.csv", "snapshot_t1.csv",
                 "distance.svg", "drift.svg", "profiles.svg"):
        assert (out / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_run_exit_codes(tmp_path):
    blow = RunConfig(h=0.1875, K=20, kind="taylor2_then_P", tau=0.2, t_end=50, cadence=1,
                     modified_energy=False)
    res = run(blow)
    assert res.record.status == "blowup" and res.exit_code == 2
    assert res.instability_time is not None
    bad = RunConfig(h=0.1875, K=20, kind="dfp", tau=2.0, dfp_maxit=3, t_end=10)
    res = run(bad)
    assert res.record.status == "dfp_failure" and res.exit_code == 3


def test_run_warns_on_cfl(caplog):
    res = run(RunConfig(**{**SMALL, "tau": 0.2}))
    assert "CFL" in caplog.text
    assert res.manifest["cfl"]["passed_M0"] is False
    assert np.isnan(res.record.reports[-1].H_modified)


def test_sweep_sorted_and_concurrent(tmp_path):
    base = RunConfig(**SMALL, emit_snapshots=False, modified_energy=False)
    grid = {"tau": [0.05, 0.01], "seed": [2, 1], "delta": [0.01]}
    assert len(expand_grid(grid)) == 4
    serial = sweep(grid, base=base, csv_path=tmp_path / "s1.csv", workers=1)
    pooled = sweep(grid, base=base, csv_path=tmp_path / "s2.csv", workers=2)
    assert (tmp_path / "s1.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()
    keys = [(r["tau"], r["seed"]) for r in serial]
    assert keys == sorted(keys)
    assert all(r["status"] == "completed" for r in pooled)
    rows = read_csv(tmp_path / "s1.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == 5
    with pytest.raises(ValueError):
        expand_grid({"nu": [1]})


def test_sweep_empty_and_errors(tmp_path):
    assert sweep({}, csv_path=tmp_path / "e.csv") == []
    assert read_csv(tmp_path / "e.csv") == [list(SWEEP_COLUMNS)]
    assert sweep({"tau": []}) == []
    rows = sweep({"tau": [-1.0]}, base=RunConfig(**SMALL))
    assert rows[0]["status"] == "error" and "tau" in rows[0]["error"]


def test_sweep_transition_visible():
    base = RunConfig(h=0.1875, K=80, t_end=150, cadence=25, emit_snapshots=False,
                     modified_energy=False)
    rows = sweep({"tau": [0.02, 0.2]}, base=base, workers=1)
    stable, unstable = rows
    assert stable["cfl_pass"] and not unstable["cfl_pass"]
    assert stable["max_dist"] < 0.5 and unstable["max_dist"] > 1


def test_plots_from_directory_deterministic(tmp_path):
    cfg = RunConfig(**SMALL, snapshot_times=(0.0, 1.0, 2.0), output_dir=str(tmp_path / "r"))
    res = run(cfg)
    p1 = [p.read_bytes() for p in plots_from_directory(tmp_path / "r")]
    p2 = [p.read_bytes() for p in plots_from_directory(tmp_path / "r")]
    assert p1 == p2 and len(p1) == 3
    assert b"<dc:date>" not in p1[0]
    lin = emit_plots(res.record, tmp_path / "lin", log_scale=False)
    assert len(lin) == 3
    with pytest.raises(FileNotFoundError):
        plots_from_directory(tmp_path / "nothing")


def test_validate_report(tmp_path):
    rep = validate(n_random=20)
    for name in ("(i) norm equivalence", "(ii) mass closeness", "(iii) energy closeness",
                 "(iv) profile approximation", "tail gamma", "discrete Sobolev (w=1)"):
        assert rep.row(name).passed, name
    assert not rep.row("operator norm vs 3 tau/h^2").within_bound
    assert rep.row("operator norm vs 4 tau/h^2").within_bound
    assert "constants" in rep.table()
    paths = rep.write(tmp_path)
    assert all(p.exists() for p in paths)
    assert is_stable([1.0, 1.9, 3.7]) and not is_stable([1.0, 2.5]) and not is_stable([1, np.nan])


def test_cli(tmp_path, capsys):
    assert main(["run", "--h", "0.3", "--K", "20", "--t-end", "1", "--tau", "0.05",
                 "-o", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "manifest.json").exists()
    assert main(["run", "--tau", "-2"]) == 64
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "bad.json")]) == 64
    assert main(["run", "--full"]) == 64
    assert main(["plot", str(tmp_path / "c")]) == 0
    assert main(["spectrum", "--tau", "0.001", "--output", str(tmp_path / "sp.csv")]) == 0
    assert "largest admissible M = 35" in capsys.readouterr().out
    assert main(["soliton", "--h", "0.4", "--K", "30", "--output", str(tmp_path / "s.csv"),
                 "--log", str(tmp_path / "l.csv")]) == 0
    out = capsys.readouterr().out
    assert json.loads(out)["converged"]
    assert main(["sweep", "--h", "0.3", "--K", "20", "--t-end", "1", "--sweep-tau", "0.05,0.1",
                 "--csv", str(tmp_path / "sw.csv"), "--workers", "1"]) == 0
    assert len(read_csv(tmp_path / "sw.csv")) == 3
    assert main(["validate", "--hs", "0.4,0.2", "--tail-ks", "40,80"]) == 0
