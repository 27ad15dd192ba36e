import csv
import io
import json

import numpy as np
import pytest

from hybridnoise.circuit import ConfigError, run_paired_trajectory, run_trajectory
from hybridnoise.experiment import (
    CSV_HEADER,
    DYNAMICS_HEADER,
    ExperimentSpec,
    load_samples,
    make_config,
    mean_stderr,
    point_seed,
    ratio_of_means,
    resolve_workers,
    row_key,
    run_experiment,
    write_outputs,
)


def small_spec(**kw):
    d = dict(name="t", seed=5, trajectories=6, observables=["I_AB", "S_AB"],
             base={"p_m": 0.1, "T_over_L": 1}, sweep={"L": [4, 6], "p": [0.0, 0.5]})
    d.update(kw)
    return ExperimentSpec(**d)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_spec_validation():
    with pytest.raises(ConfigError):
        small_spec(mode="bogus")
    with pytest.raises(ConfigError):
        small_spec(observables=["xeb"])
    with pytest.raises(ConfigError):
        small_spec(base={"colour": 1})
    with pytest.raises(ConfigError):
        small_spec(sweep={"L": 4})
    with pytest.raises(ConfigError):
        small_spec(trajectories=0)
    with pytest.raises(ConfigError):
        small_spec(sweep={"L": [4], "p": [10.0]}, base={"alpha": 0})  # q > 1
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"name": "x", "seed": 1, "trajectories": 1, "observables": ["I_AB"],
                                  "sweep": {"L": [4]}, "unknown": 3})


def test_from_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentSpec.from_json(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(small_spec().to_dict()), encoding="utf-8")
    assert ExperimentSpec.from_json(good).spec_hash == small_spec().spec_hash


def test_make_config_rules():
    cfg = make_config({"L": 8, "T_over_L": 0.5, "encoding": "initial_bell", "T_scr": "T"}, 1)
    assert cfg.T == 4 and cfg.T_scr == 4
    assert make_config({"L": 8, "encoding": "initial_bell", "T_scr": "L"}, 1).T_scr == 8
    with pytest.raises(ConfigError):
        make_config({"L": 6, "T_over_L": 0.25}, 1)
    with pytest.raises(ConfigError):
        make_config({"L": 6, "T_scr": "x", "encoding": "initial_bell"}, 1)
    with pytest.raises(ConfigError):
        make_config({"p": 0.1}, 1)


def test_point_seed_depends_on_params_only():
    a = point_seed(1, {"L": 8, "p": 0.1})
    assert a == point_seed(1, {"p": 0.1, "L": 8})
    assert a != point_seed(2, {"L": 8, "p": 0.1})
    assert a != point_seed(1, {"L": 8, "p": 0.2})


def test_grid_order_and_size():
    spec = small_spec()
    assert spec.size == 4
    assert [(c.L, c.p) for c in spec.points()] == [(4, 0.0), (4, 0.5), (6, 0.0), (6, 0.5)]


def test_final_rows_match_direct_runs():
    spec = small_spec()
    res = run_experiment(spec, workers=1)
    assert len(res.rows) == spec.size * 2
    cfg = spec.points()[3]
    direct = [run_trajectory(cfg, i).final["I_AB"] for i in range(spec.trajectories)]
    row = next(r for r in res.rows if r["L"] == 6 and r["p"] == 0.5 and r["observable"] == "I_AB")
    m, se = mean_stderr(direct)
    assert row["mean"] == m and row["stderr"] == se and row["n_traj"] == 6
    assert np.array_equal(res.samples[row_key(row)], direct)


def test_csv_byte_identical_across_runs_and_workers(monkeypatch):
    monkeypatch.delenv("HYBRIDNOISE_WORKERS", raising=False)
    spec = small_spec()
    one = run_experiment(spec, workers=1).csv_text()
    again = run_experiment(spec, workers=1).csv_text()
    two = run_experiment(spec, workers=2).csv_text()
    assert one == again == two
    assert one.splitlines()[0] == ",".join(CSV_HEADER)


def test_workers_env_override(monkeypatch):
    monkeypatch.setenv("HYBRIDNOISE_WORKERS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.setenv("HYBRIDNOISE_WORKERS", "x")
    with pytest.raises(ConfigError):
        resolve_workers()
    monkeypatch.delenv("HYBRIDNOISE_WORKERS")
    assert resolve_workers(2) == 2


def test_paired_mode():
    spec = ExperimentSpec(name="x", seed=2, trajectories=8, observables=["xeb", "fidelity", "F_over_XEB"],
                          base={"T_over_L": 1}, sweep={"L": [8], "p": [0.0, 0.2]}, mode="paired")
    res = run_experiment(spec, workers=1)
    cfg = spec.points()[1]
    pairs = [run_paired_trajectory(cfg, i)[1].final for i in range(8)]
    xs, fs = np.array([d["xeb"] for d in pairs]), np.array([d["fidelity"] for d in pairs])
    by = {(r["p"], r["observable"]): r for r in res.rows}
    assert by[(0.2, "xeb")]["mean"] == xs.mean() > 0
    assert by[(0.2, "F_over_XEB")]["mean"] == pytest.approx(fs.mean() / xs.mean())
    # noiseless: fidelity 1 and xeb = 2^k - 1
    assert by[(0.0, "fidelity")]["mean"] == 1.0


def test_ratio_of_means():
    rng = np.random.default_rng(0)
    den = rng.uniform(1, 2, 4000)
    num = 0.5 * den + rng.normal(0, 0.01, 4000)
    r, se = ratio_of_means(num, den)
    assert r == pytest.approx(0.5, abs=1e-3) and 0 < se < 1e-3
    assert np.isnan(ratio_of_means(np.ones(3), np.zeros(3))[0])


def test_dynamics_mode():
    spec = ExperimentSpec(name="d", seed=1, trajectories=4, observables=["I_ABR"], mode="dynamics",
                          sample_every=2, base={"encoding": "initial_bell", "T_over_L": 1},
                          sweep={"L": [4], "p": [0.0]})
    res = run_experiment(spec, workers=1)
    text = res.csv_text()
    assert text.splitlines()[0] == ",".join(DYNAMICS_HEADER)
    got = rows(text)
    assert [int(r["t"]) for r in got] == [0, 2, 4]
    assert all(float(r["mean"]) == 2.0 for r in got)  # no noise, no measurement


def test_write_outputs(tmp_path):
    res = run_experiment(small_spec(), workers=1)
    paths = write_outputs(res, tmp_path)
    assert paths["csv"].read_text(encoding="utf-8") == res.csv_text()
    man = json.loads(paths["manifest"].read_text(encoding="utf-8"))
    assert man["spec_hash"] == res.spec.spec_hash and man["seed"] == 5
    assert {"numpy", "numba", "scipy", "python"} <= set(man["versions"])
    assert len(man["wall_clock_seconds"]) == 4
    samples = load_samples(paths["samples"])
    assert set(samples) == set(res.samples)


def test_spec_hash_changes_with_content():
    assert small_spec().spec_hash != small_spec(seed=6).spec_hash
    assert small_spec().spec_hash == small_spec().spec_hash


def test_shared_points_agree_between_specs():
    a = run_experiment(small_spec(), workers=1)
    b = run_experiment(small_spec(name="other", sweep={"L": [6], "p": [0.5]}), workers=1)
    ra = {row_key(r): r["mean"] for r in a.rows}
    for r in b.rows:
        assert ra[row_key(r)] == r["mean"]
