import json

import numpy as np
import pytest

from hybridnoise.cli import EXIT_CONFIG, EXIT_FIT, EXIT_IO, EXIT_OK, main
from hybridnoise.experiment import CSV_HEADER


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    monkeypatch.setenv("HYBRIDNOISE_WORKERS", "1")


def write_spec(path, **kw):
    d = dict(name="cli", seed=1, trajectories=4, observables=["I_AB"],
             base={"p_m": 0.1, "T_over_L": 1}, sweep={"L": [4], "p": [0.0, 0.4]})
    d.update(kw)
    path.write_text(json.dumps(d), encoding="utf-8")
    return path


def test_run_writes_outputs(tmp_path, capsys):
    spec = write_spec(tmp_path / "s.json")
    assert main(["run", str(spec), "--seed", "3", "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_OK
    text = (tmp_path / "o" / "cli.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == ",".join(CSV_HEADER) and len(text.splitlines()) == 3
    man = json.loads((tmp_path / "o" / "cli.manifest.json").read_text(encoding="utf-8"))
    assert man["seed"] == 3
    assert main(["run", str(spec), "--seed", "3", "--out", str(tmp_path / "p"), "--quiet"]) == EXIT_OK
    assert (tmp_path / "p" / "cli.csv").read_text(encoding="utf-8") == text


def test_run_requires_seed(tmp_path):
    spec = write_spec(tmp_path / "s.json")
    with pytest.raises(SystemExit):
        main(["run", str(spec)])


def test_config_errors_exit_2(tmp_path):
    bad = write_spec(tmp_path / "bad.json", mode="nope")
    assert main(["run", str(bad), "--seed", "1", "--quiet"]) == EXIT_CONFIG
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    assert main(["run", str(tmp_path / "broken.json"), "--seed", "1"]) == EXIT_CONFIG
    assert main(["oracle", "--L", "8", "--p", "100", "--alpha", "0"]) == EXIT_CONFIG


def test_missing_file_exit_3(tmp_path):
    assert main(["run", str(tmp_path / "none.json"), "--seed", "1"]) == EXIT_IO
    assert main(["collapse", str(tmp_path / "none.csv"), "--observable", "I_AB"]) == EXIT_IO


def test_sweep_matches_run(tmp_path):
    args = ["sweep", "--name", "cli", "--seed", "1", "--L", "4", "--p", "0", "0.4", "--p-m", "0.1",
            "--T-over-L", "1", "--trajectories", "4", "--out", str(tmp_path / "a"), "--quiet"]
    assert main(args) == EXIT_OK
    rows = (tmp_path / "a" / "cli.csv").read_text(encoding="utf-8").splitlines()[1:]
    assert len(rows) == 2 and rows[1].split(",")[5] == "0.4"


def _synthetic_csv(path, with_samples=False):
    rng = np.random.default_rng(0)
    lines = [",".join(CSV_HEADER)]
    samples = {}
    for L in (16, 32, 64, 128):
        for p in map(float, np.linspace(0.1, 0.3, 9)):
            s = np.tanh((p - 0.2) * L ** 0.5) + rng.normal(0, 0.02, 50)
            lines.append(f"h,{L},{4 * L},0,0.0,{p!r},1.0,I_AB,{float(s.mean())!r},{float(s.std(ddof=1) / np.sqrt(50))!r},50")
            samples[f"L={L},T={4 * L},T_scr=0,p_m=0.0,p={p!r},alpha=1.0,observable=I_AB"] = s
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if with_samples:
        np.savez(path.with_suffix(".samples.npz"), **samples)
    return path


def test_collapse_reports_fit(tmp_path, capsys):
    csv = _synthetic_csv(tmp_path / "sweep.csv")
    out = tmp_path / "fit.json"
    assert main(["collapse", str(csv), "--observable", "I_AB", "--out", str(out)]) == EXIT_OK
    fit = json.loads(out.read_text(encoding="utf-8"))
    assert fit["p_c"] == pytest.approx(0.2, abs=0.01)
    assert fit["nu"] == pytest.approx(2.0, abs=0.3)
    assert main(["collapse", str(csv), "--observable", "I_AB", "--fix-nu", "2"]) == EXIT_OK
    assert main(["collapse", str(csv), "--observable", "nothing"]) == EXIT_CONFIG


def test_collapse_bootstrap(tmp_path, capsys):
    csv = _synthetic_csv(tmp_path / "sweep.csv", with_samples=True)
    assert main(["collapse", str(csv), "--observable", "I_AB", "--fix-nu", "2", "--bootstrap", "100"]) == EXIT_OK
    fit = json.loads(capsys.readouterr().out)
    assert 0 < fit["bootstrap_sd"][0] < 0.01


def test_collapse_nonconvergence_exit_4(tmp_path):
    path = tmp_path / "flat.csv"
    lines = [",".join(CSV_HEADER)]
    for L in (16, 32, 64):
        for p in (0.1, 0.2, 0.3, 0.4, 0.5):
            lines.append(f"h,{L},{4 * L},0,0.0,{p},1.0,I_AB,nan,0.1,10")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["collapse", str(path), "--observable", "I_AB"]) == EXIT_FIT


def test_oracle(capsys):
    assert main(["oracle", "--L", "64", "--T", "256", "--p", "0.1"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["dominant"] == "all_C" and out["p_c"] == 0.25
    assert main(["oracle", "--L", "64", "--T", "256", "--p", "0.1", "--p-grid", "0.1", "0.5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["grid"] == {"0.1": "all_C", "0.5": "wall"}
    assert main(["oracle", "--L", "32", "--T", "128", "--p", "0.5", "--alpha", "0",
                 "--noise-placement", "left_boundary"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["dominant"] == "wall"


def test_oracle_pattern(tmp_path, capsys):
    pat = tmp_path / "noise.csv"
    pat.write_text("x,t\n3,5\n", encoding="utf-8")
    assert main(["oracle", "--L", "8", "--T", "8", "--pattern", str(pat)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["F_allC"] == 1 and out["dominant"] == "all_C"
    pat.write_text("x,t\n30,5\n", encoding="utf-8")
    assert main(["oracle", "--L", "8", "--T", "8", "--pattern", str(pat)]) == EXIT_CONFIG


def test_xeb_subcommand(tmp_path):
    assert main(["xeb", "--seed", "2", "--L", "6", "--p", "0", "0.3", "--trajectories", "3",
                 "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    rows = (tmp_path / "xeb.csv").read_text(encoding="utf-8").splitlines()[1:]
    assert sorted({r.split(",")[7] for r in rows}) == ["F_over_XEB", "fidelity", "xeb"]


def test_fraction_arguments(tmp_path, capsys):
    assert main(["oracle", "--L", "64", "--T", "256", "--p", "1/8"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["dominant"] == "all_C"
