"""Experiment specs, ensemble execution and result persistence.

A spec is a JSON document::

    {
      "name": "fig4",
      "seed": 20240101,
      "mode": "final",                # final | paired | dynamics
      "trajectories": 400,
      "observables": ["I_AB", "E_N"],
      "base": {"p_m": 0.2, "alpha": 1.0, "T_over_L": 4},
      "sweep": {"L": [16, 32, 64, 128], "p": [0.02, 0.04, 0.06]}
    }

``base`` holds CircuitConfig fields plus the derived keys ``T_over_L`` and
``T_scr`` (an integer, ``"T"`` or ``"L"``). ``sweep`` axes may name any base key;
the cross product is taken in the order the axes are listed. Every grid point
owns a seed derived from the spec seed and the point's parameters, so points
shared between specs give identical results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitConfig, ConfigError, run_paired_trajectory, run_trajectory

CSV_HEADER = ["spec_hash", "L", "T", "T_scr", "p_m", "p", "alpha", "observable", "mean", "stderr", "n_traj"]
DYNAMICS_HEADER = CSV_HEADER[:8] + ["t"] + CSV_HEADER[8:]
MODES = ("final", "paired", "dynamics")
FINAL_OBSERVABLES = ("S_AB", "I_AB", "E_N", "I_ABR", "S_A", "S_B")
PAIRED_OBSERVABLES = ("xeb", "fidelity", "F_over_XEB", "S_AB")
WORKERS_ENV = "HYBRIDNOISE_WORKERS"
_CONFIG_FIELDS = {f.name for f in fields(CircuitConfig)}
_DERIVED = {"T_over_L"}


@dataclass
class ExperimentSpec:
    name: str
    seed: int
    trajectories: int
    observables: list
    base: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    mode: str = "final"
    sample_every: int = 1  # dynamics mode only
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if int(self.trajectories) < 1:
            raise ConfigError("trajectories must be positive")
        self.trajectories = int(self.trajectories)
        self.seed = int(self.seed)
        self.observables = list(self.observables)
        allowed = PAIRED_OBSERVABLES if self.mode == "paired" else FINAL_OBSERVABLES
        bad = [o for o in self.observables if o not in allowed]
        if bad or not self.observables:
            raise ConfigError(f"observables {bad or '[]'} not available in mode {self.mode!r}")
        for key in list(self.base) + list(self.sweep):
            if key not in _CONFIG_FIELDS | _DERIVED or key in ("seed", "trajectories", "sample_observables"):
                raise ConfigError(f"unknown or reserved spec key {key!r}")
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep axis {key!r} must be a nonempty list")
        self.points()  # validates every configuration up front

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known - {"description", "expected_runtime"}
        if extra:
            raise ConfigError(f"unknown spec fields {sorted(extra)}")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "trajectories": self.trajectories,
                "observables": self.observables, "base": self.base, "sweep": self.sweep,
                "mode": self.mode, "sample_every": self.sample_every}

    @property
    def spec_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    def grid(self) -> list[dict]:
        axes = list(self.sweep)
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.sweep[a] for a in axes))]

    def points(self) -> list[CircuitConfig]:
        out = []
        for combo in self.grid():
            params = {**self.base, **combo}
            out.append(make_config(params, point_seed(self.seed, params)))
        return out

    @property
    def size(self) -> int:
        return len(self.grid())


def make_config(params: dict, seed: int) -> CircuitConfig:
    p = dict(params)
    L = int(p["L"]) if "L" in p else None
    if L is None:
        raise ConfigError("every grid point needs L")
    ratio = p.pop("T_over_L", None)
    if ratio is not None:
        if "T" in p:
            raise ConfigError("give either T or T_over_L")
        T = ratio * L
        if abs(T - round(T)) > 1e-9:
            raise ConfigError(f"T_over_L = {ratio} gives non-integer T at L = {L}")
        p["T"] = int(round(T))
    T = p.get("T", 4 * L)
    rule = p.get("T_scr", 0)
    if isinstance(rule, str):
        if rule not in ("T", "L"):
            raise ConfigError(f"T_scr must be an integer, 'T' or 'L', got {rule!r}")
        p["T_scr"] = int(T) if rule == "T" else L
    p["seed"] = seed
    try:
        return CircuitConfig(**p)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def point_seed(seed: int, params: dict) -> int:
    canon = json.dumps({"seed": int(seed), **{k: params[k] for k in sorted(params)}}, sort_keys=True)
    return int.from_bytes(hashlib.blake2b(canon.encode("utf-8"), digest_size=8).digest(), "little") >> 1


def resolve_workers(requested: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
    if requested:
        return max(1, int(requested))
    return os.cpu_count() or 1


# ensemble execution -------------------------------------------------------------------

def _final_chunk(args):
    cfg, lo, hi, observables = args
    return [[run_trajectory(cfg, i).final[o] for o in observables] for i in range(lo, hi)]


def _paired_chunk(args):
    cfg, lo, hi, _ = args
    out = []
    for i in range(lo, hi):
        _, noisy = run_paired_trajectory(cfg, i)
        out.append([noisy.final["xeb"], noisy.final["fidelity"], noisy.final["S_AB"]])
    return out


def _dynamics_chunk(args):
    cfg, lo, hi, _ = args
    out = []
    for i in range(lo, hi):
        rec = run_trajectory(cfg, i)
        out.append(np.stack([rec.samples[o] for o in cfg.sample_observables]))
    return out, rec.times


def _chunks(n, workers):
    size = max(1, -(-n // (4 * workers)))
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def run_point(cfg: CircuitConfig, observables, n_traj: int, mode: str = "final", workers: int = 1,
              pool=None):
    """Trajectory values for one grid point, merged in trajectory-index order."""
    fn = {"final": _final_chunk, "paired": _paired_chunk, "dynamics": _dynamics_chunk}[mode]
    tasks = [(cfg, lo, hi, tuple(observables)) for lo, hi in _chunks(n_traj, workers)]
    results = list(pool.map(fn, tasks)) if pool is not None else [fn(t) for t in tasks]
    if mode == "dynamics":
        times = results[0][1]
        arr = np.stack([a for chunk, _ in results for a in chunk])  # (n_traj, n_obs, n_times)
        return {o: arr[:, k, :] for k, o in enumerate(cfg.sample_observables)}, times
    arr = np.array([row for chunk in results for row in chunk], dtype=float)
    if mode == "paired":
        return {"xeb": arr[:, 0], "fidelity": arr[:, 1], "S_AB": arr[:, 2]}, None
    return {o: arr[:, k] for k, o in enumerate(observables)}, None


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


def ratio_of_means(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """mean(num)/mean(den) with a delta-method standard error."""
    n = len(num)
    a, b = float(np.mean(num)), float(np.mean(den))
    if b == 0:
        return float("nan"), float("nan")
    r = a / b
    if n < 2:
        return r, 0.0
    cov = np.cov(num, den, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (b * b * n)
    return r, float(np.sqrt(max(var, 0.0)))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list  # dicts keyed by the CSV header (plus "t" for dynamics)
    samples: dict  # row key -> per-trajectory array
    wall_clock: list  # seconds per grid point
    workers: int

    def csv_text(self) -> str:
        header = DYNAMICS_HEADER if self.spec.mode == "dynamics" else CSV_HEADER
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in self.rows:
            w.writerow([_fmt(row[h]) for h in header])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def row_key(row: dict) -> str:
    parts = [f"{k}={row[k]}" for k in ("L", "T", "T_scr", "p_m", "p", "alpha", "observable")]
    if "t" in row:
        parts.append(f"t={row['t']}")
    return ",".join(parts)


def run_experiment(spec: ExperimentSpec, workers: int | None = None, progress=None) -> ExperimentResult:
    workers = resolve_workers(workers if workers is not None else spec.workers)
    configs = spec.points()
    rows, samples, clocks = [], {}, []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k, cfg in enumerate(configs):
            t0 = time.perf_counter()
            if spec.mode == "dynamics":
                cfg.sample_every = spec.sample_every
                cfg.sample_observables = tuple(spec.observables)
            values, times = run_point(cfg, spec.observables, spec.trajectories, spec.mode, workers, pool)
            clocks.append(time.perf_counter() - t0)
            base = {"spec_hash": spec.spec_hash, "L": cfg.L, "T": cfg.T, "T_scr": cfg.T_scr,
                    "p_m": float(cfg.p_m), "p": float(cfg.p), "alpha": float(cfg.alpha),
                    "n_traj": spec.trajectories}
            for obs in spec.observables:
                if spec.mode == "dynamics":
                    for j, t in enumerate(times):
                        m, se = mean_stderr(values[obs][:, j])
                        row = {**base, "observable": obs, "t": int(t), "mean": m, "stderr": se}
                        rows.append(row)
                        samples[row_key(row)] = values[obs][:, j]
                    continue
                if obs == "F_over_XEB":
                    m, se = ratio_of_means(values["fidelity"], values["xeb"])
                    data = np.column_stack([values["fidelity"], values["xeb"]])
                else:
                    data = values[obs]
                    m, se = mean_stderr(data)
                row = {**base, "observable": obs, "mean": m, "stderr": se}
                rows.append(row)
                samples[row_key(row)] = data
            if progress is not None:
                progress(k + 1, len(configs), cfg, clocks[-1])
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentResult(spec, rows, samples, clocks, workers)


def versions() -> dict:
    import numba
    import scipy
    return {"hybridnoise": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "numba": numba.__version__, "scipy": scipy.__version__}


def write_outputs(result: ExperimentResult, out_dir) -> dict:
    """Write ``<name>.csv``, ``<name>.manifest.json`` and ``<name>.samples.npz``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.spec.name
    paths = {"csv": out / f"{name}.csv", "manifest": out / f"{name}.manifest.json",
             "samples": out / f"{name}.samples.npz"}
    paths["csv"].write_text(result.csv_text(), encoding="utf-8")
    np.savez_compressed(paths["samples"], **{k: np.asarray(v) for k, v in result.samples.items()})
    manifest = {"spec": result.spec.to_dict(), "spec_hash": result.spec.spec_hash,
                "seed": result.spec.seed, "grid_points": result.spec.size, "workers": result.workers,
                "versions": versions(), "wall_clock_seconds": result.wall_clock,
                "total_seconds": float(sum(result.wall_clock))}
    paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return paths


def load_samples(path) -> dict:
    with np.load(path) as data:
        return {k: data[k] for k in data.files}
