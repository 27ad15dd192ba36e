"""Hybrid brick-wall circuits with measurements and reset noise.

Per hybrid layer the random stream is consumed in a fixed order:

1. gate indices for every bond of both sublayers (``integers``),
2. one measurement coin per site (``random(L)``),
3. one outcome coin per site (``random(L)``),
4. noise coins: one per site for bulk noise, a single one for left-boundary noise.

Scrambling layers draw only step 1. Each trajectory owns a Philox stream keyed
by ``(seed, trajectory_index)``, so results do not depend on scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import clifford2, observables
from .tableau import StabilizerState, _measure_z, _reset

BOUNDARIES = ("periodic", "open")
PLACEMENTS = ("bulk", "left_boundary")
ENCODINGS = ("none", "initial_bell", "steady_state_bell")


class ConfigError(ValueError):
    """Invalid circuit or experiment configuration."""


@dataclass
class CircuitConfig:
    L: int
    T: int | None = None  # defaults to 4L
    T_scr: int = 0
    p_m: float = 0.0
    p: float = 0.0
    alpha: float = 1.0
    boundary: str = "periodic"
    noise_placement: str = "bulk"
    encoding: str = "none"
    encode_site: int = 0
    seed: int = 0
    trajectories: int = 1
    T_pre: int | None = None  # equilibration before steady-state encoding; defaults to 4L
    sample_every: int = 0  # 0: final state only
    sample_observables: tuple = ("I_ABR",)

    def __post_init__(self):
        self.L = int(self.L)
        if self.L < 2 or self.L % 2:
            raise ConfigError(f"L must be an even integer >= 2, got {self.L}")
        if self.T is None:
            self.T = 4 * self.L
        if self.T_pre is None:
            self.T_pre = 4 * self.L
        if self.T < 0 or self.T_scr < 0 or self.T_pre < 0:
            raise ConfigError("depths must be nonnegative")
        if not 0.0 <= self.p_m <= 1.0:
            raise ConfigError(f"p_m must lie in [0, 1], got {self.p_m}")
        if self.p < 0:
            raise ConfigError(f"p must be nonnegative, got {self.p}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}")
        if self.noise_placement not in PLACEMENTS:
            raise ConfigError(f"noise_placement must be one of {PLACEMENTS}")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}")
        if self.noise_placement == "left_boundary" and self.boundary != "open":
            warnings.warn("left_boundary noise forces open boundary conditions", stacklevel=2)
            self.boundary = "open"
        if self.T_scr and self.encoding == "none":
            raise ConfigError("T_scr is only meaningful with an encoding mode")
        if not 0 <= self.encode_site < self.L:
            raise ConfigError(f"encode_site {self.encode_site} outside [0, {self.L})")
        q = self.q
        if q > 1.0 + 1e-12:
            raise ConfigError(f"noise probability q = p / L**alpha = {q:.4g} exceeds 1")
        self.sample_observables = tuple(self.sample_observables)

    @property
    def q(self) -> float:
        return self.p / self.L**self.alpha

    @property
    def has_reference(self) -> bool:
        return self.encoding != "none"

    @property
    def num_sites(self) -> int:
        return self.L + 1 if self.has_reference else self.L

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_observables"] = list(self.sample_observables)
        return d


@dataclass
class TrajectoryRecord:
    index: int
    stream: tuple  # (seed, index)
    final: dict  # observable name -> value at the end of the run
    times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    samples: dict = field(default_factory=dict)  # observable name -> array over ``times``
    noise_events: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    measure_events: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    state: StabilizerState | None = None


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def brickwall_pairs(L: int, boundary: str = "periodic") -> np.ndarray:
    """Bond list of one layer: sublayer (2i+1, 2i+2) first, then (2i+2, 2i+3), mod L."""
    pairs = []
    for offset in (1, 2):
        for i in range(L // 2):
            a = (2 * i + offset) % L
            b = (2 * i + offset + 1) % L
            if boundary == "open" and b < a:
                continue
            pairs.append((a, b))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


@njit(cache=True)
def _meas_noise_pass(xs, zs, signs, m, n, L, meas_coins, outcome_coins, noise_coins, p_m, q):
    """Measurement then reset per site; a single noise coin means left-boundary placement."""
    boundary_only = noise_coins.shape[0] == 1
    for site in range(L):
        if meas_coins[site] < p_m:
            res = _measure_z(xs, zs, signs, m, n, site, outcome_coins[site], False)
            m = res[1]
        if boundary_only:
            if site == 0 and noise_coins[0] < q:
                m = _reset(xs, zs, signs, m, 0)
        elif noise_coins[site] < q:
            m = _reset(xs, zs, signs, m, site)
    return m


@dataclass
class LayerDraws:
    gates: np.ndarray
    meas_coins: np.ndarray
    outcome_coins: np.ndarray
    noise_coins: np.ndarray


def draw_layer(rng: np.random.Generator, config: CircuitConfig, n_bonds: int) -> LayerDraws:
    L = config.L
    gates = clifford2.sample_uniform_clifford2(rng, n_bonds).astype(np.int64)
    meas = rng.random(L)
    outc = rng.random(L)
    noise = rng.random(1 if config.noise_placement == "left_boundary" else L)
    return LayerDraws(gates, meas, outc, noise)


def apply_brickwall_layer(state: StabilizerState, gates: np.ndarray, pairs: np.ndarray) -> StabilizerState:
    if len(gates) != len(pairs):
        raise ValueError("need one gate per bond")
    return state.apply_gates(gates, pairs)


def apply_noise_and_measurement_layer(state: StabilizerState, config: CircuitConfig,
                                      draws: LayerDraws, t: int | None = None):
    """Measurement/reset pass; returns ``(state, events)`` with events ``(site, t, kind)``."""
    state.m = int(_meas_noise_pass(state.xs, state.zs, state.signs, state.m, state.num_sites,
                                   config.L, draws.meas_coins, draws.outcome_coins,
                                   draws.noise_coins, config.p_m, config.q))
    return state, layer_events(config, draws, t)


def layer_events(config: CircuitConfig, draws: LayerDraws, t) -> list[tuple[int, int, str]]:
    events = []
    for site in np.nonzero(draws.meas_coins < config.p_m)[0]:
        events.append((int(site), t, "M"))
    if config.noise_placement == "left_boundary":
        if draws.noise_coins[0] < config.q:
            events.append((0, t, "R"))
    else:
        for site in np.nonzero(draws.noise_coins < config.q)[0]:
            events.append((int(site), t, "R"))
    return events


def encode_bell(state: StabilizerState, encode_site: int, reference_site: int) -> StabilizerState:
    """Reset both sites and prepare the Bell pair (|00> + |11>)/sqrt(2) on them."""
    if not 0 <= encode_site < state.num_sites or encode_site == reference_site:
        raise ConfigError(f"bad encode site {encode_site}")
    g = clifford2.named_gates()
    state.reset(encode_site).reset(reference_site)
    state.apply_clifford2(g["H0"], encode_site, reference_site)
    state.apply_clifford2(g["CNOT"], encode_site, reference_site)
    return state


def _sample(state: StabilizerState, config: CircuitConfig, names) -> dict:
    A, B = observables.half_chains(config.L)
    out = {}
    for name in names:
        if name == "I_ABR":
            out[name] = float(observables.info_retention(state, config.L))
        elif name == "S_AB":
            out[name] = float(observables.entropy(state, range(config.L)))
        elif name == "I_AB":
            out[name] = float(observables.mutual_information(state, A, B))
        elif name == "E_N":
            out[name] = float(observables.log_negativity(state, B))
        else:
            raise ConfigError(f"unknown observable {name!r}")
    return out


class _Runner:
    """Shared machinery for one trajectory's random stream."""

    def __init__(self, config: CircuitConfig, index: int):
        self.config = config
        self.rng = trajectory_rng(config.seed, index)
        self.pairs = brickwall_pairs(config.L, config.boundary)
        self.n_bonds = len(self.pairs)

    def scramble(self, states):
        gates = clifford2.sample_uniform_clifford2(self.rng, self.n_bonds).astype(np.int64)
        for st in states:
            st.apply_gates(gates, self.pairs)

    def hybrid(self, state, noisy=True):
        draws = draw_layer(self.rng, self.config, self.n_bonds)
        state.apply_gates(draws.gates, self.pairs)
        cfg = self.config
        q = cfg.q if noisy else 0.0
        state.m = int(_meas_noise_pass(state.xs, state.zs, state.signs, state.m, state.num_sites,
                                       cfg.L, draws.meas_coins, draws.outcome_coins,
                                       draws.noise_coins, cfg.p_m, q))
        return draws


def _noise_sites(config: CircuitConfig, draws: LayerDraws) -> np.ndarray:
    if config.noise_placement == "left_boundary":
        return np.array([0]) if draws.noise_coins[0] < config.q else np.zeros(0, np.int64)
    return np.nonzero(draws.noise_coins < config.q)[0]


def run_trajectory(config: CircuitConfig, trajectory_index: int, keep_state: bool = False) -> TrajectoryRecord:
    """Scrambling/encoding stages (if any) then ``T`` hybrid layers."""
    cfg = config
    run = _Runner(cfg, trajectory_index)
    state = StabilizerState.zero_state(cfg.num_sites)
    ref = cfg.L
    if cfg.encoding == "steady_state_bell":
        for _ in range(cfg.T_pre):
            run.hybrid(state)
    if cfg.has_reference:
        encode_bell(state, cfg.encode_site, ref)
        for _ in range(cfg.T_scr):
            run.scramble([state])

    times, samples = [], {k: [] for k in cfg.sample_observables} if cfg.sample_every else {}
    if cfg.sample_every:
        times.append(0)
        for k, v in _sample(state, cfg, cfg.sample_observables).items():
            samples[k].append(v)
    noise_ev, meas_ev = [], []
    for t in range(cfg.T):
        draws = run.hybrid(state)
        for x in _noise_sites(cfg, draws):
            noise_ev.append((int(x), t))
        for x in np.nonzero(draws.meas_coins < cfg.p_m)[0]:
            meas_ev.append((int(x), t))
        if cfg.sample_every and (t + 1) % cfg.sample_every == 0:
            times.append(t + 1)
            for k, v in _sample(state, cfg, cfg.sample_observables).items():
                samples[k].append(v)

    final = observables.summary(state, cfg.L, cfg.has_reference)
    return TrajectoryRecord(
        index=int(trajectory_index),
        stream=(int(cfg.seed), int(trajectory_index)),
        final=final,
        times=np.array(times, dtype=np.int64),
        samples={k: np.array(v, dtype=float) for k, v in samples.items()},
        noise_events=np.array(noise_ev, dtype=np.int64).reshape(-1, 2),
        measure_events=np.array(meas_ev, dtype=np.int64).reshape(-1, 2),
        state=state if keep_state else None,
    )


def run_paired_trajectory(config: CircuitConfig, trajectory_index: int):
    """Noiseless and noisy copies driven by one gate sequence.

    Returns ``(pure_record, noisy_record)``; both carry final states and the
    noisy record's ``final`` includes ``xeb`` and ``fidelity``.
    """
    from .xeb import pair_summary

    cfg = config
    if cfg.encoding != "none":
        raise ConfigError("paired trajectories do not support encoding")
    if cfg.p_m != 0:
        raise ConfigError("paired trajectories require p_m = 0 (outcome records would diverge)")
    run = _Runner(cfg, trajectory_index)
    pure = StabilizerState.zero_state(cfg.L)
    noisy = StabilizerState.zero_state(cfg.L)
    noise_ev = []
    for t in range(cfg.T):
        draws = draw_layer(run.rng, cfg, run.n_bonds)
        pure.apply_gates(draws.gates, run.pairs)
        noisy.apply_gates(draws.gates, run.pairs)
        noisy.m = int(_meas_noise_pass(noisy.xs, noisy.zs, noisy.signs, noisy.m, noisy.num_sites,
                                       cfg.L, draws.meas_coins, draws.outcome_coins,
                                       draws.noise_coins, 0.0, cfg.q))
        for x in _noise_sites(cfg, draws):
            noise_ev.append((int(x), t))
    summ = pair_summary(pure, noisy)
    stream = (int(cfg.seed), int(trajectory_index))
    ev = np.array(noise_ev, dtype=np.int64).reshape(-1, 2)
    pure_rec = TrajectoryRecord(trajectory_index, stream, {"S_AB": 0.0}, state=pure)
    noisy_rec = TrajectoryRecord(
        trajectory_index, stream,
        {"S_AB": float(observables.purity_entropy(noisy)), "xeb": summ.xeb, "fidelity": summ.fidelity},
        noise_events=ev, state=noisy,
    )
    return pure_rec, noisy_rec
