"""Large-d effective spin model for hybrid circuits with reset noise.

Spins live in the permutation group S_r. All weights are reported as the
exponent of the local dimension d at leading order, so free energies are in
units of log d. The identity spin is ``I`` and the boundary spin ``C`` is the
full r-cycle (a transposition for r = 2).

Noise events at space-time points (x, t) pin spins to ``I``. The dominant
domain wall follows the upper envelope of downward light cones (velocity one
site per brick-wall layer) opened at the topmost noise events.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .circuit import CircuitConfig, ConfigError

MAX_ENUMERABLE_R = 8


# permutations ------------------------------------------------------------------

@dataclass(frozen=True)
class Permutation:
    images: tuple  # images[i] = sigma(i)

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(len(imgs))) or len(imgs) < 1:
            raise ValueError(f"not a permutation: {self.images}")
        object.__setattr__(self, "images", imgs)

    @property
    def r(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, r: int) -> "Permutation":
        return cls(tuple(range(r)))

    @classmethod
    def cycle(cls, r: int) -> "Permutation":
        """The full cycle 0 -> 1 -> ... -> r-1 -> 0."""
        return cls(tuple((i + 1) % r for i in range(r)))

    @classmethod
    def transposition(cls, r: int, i: int = 0, j: int = 1) -> "Permutation":
        imgs = list(range(r))
        imgs[i], imgs[j] = j, i
        return cls(tuple(imgs))

    @classmethod
    def all(cls, r: int):
        return [cls(p) for p in itertools.permutations(range(r))]

    def __mul__(self, other: "Permutation") -> "Permutation":
        # (self * other)(i) = self(other(i))
        if other.r != self.r:
            raise ValueError("permutations act on different replica counts")
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self) -> "Permutation":
        inv = [0] * self.r
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def num_cycles(self) -> int:
        seen = [False] * self.r
        count = 0
        for start in range(self.r):
            if not seen[start]:
                count += 1
                j = start
                while not seen[j]:
                    seen[j] = True
                    j = self.images[j]
        return count


def _perm(p) -> Permutation:
    return p if isinstance(p, Permutation) else Permutation(tuple(p))


def perm_distance(sigma) -> int:
    """|sigma| = r - #cycles, the minimal number of transpositions."""
    s = _perm(sigma)
    return s.r - s.num_cycles()


def diagonal_bond_weight_exponent(sigma, tau) -> int:
    """Exponent of d in <sigma|tau> = d^(r - |sigma^-1 tau|)."""
    s, t = _perm(sigma), _perm(tau)
    if s.r != t.r:
        raise ValueError("permutations act on different replica counts")
    return s.r - perm_distance(s.inverse() * t)


def triangle_weight_leading_exponent(s1, s2, s3) -> int:
    """Leading power of d of the downward-triangle weight with bottom spins s1, s2 and top s3."""
    a, b, c = _perm(s1), _perm(s2), _perm(s3)
    r = a.r
    if not (b.r == r and c.r == r):
        raise ValueError("permutations act on different replica counts")
    if r > MAX_ENUMERABLE_R:
        raise ValueError(f"r = {r} too large to enumerate (max {MAX_ENUMERABLE_R})")
    ai, bi, ci = a.inverse(), b.inverse(), c.inverse()
    return max(-2 * perm_distance(ci * t) - perm_distance(ai * t) - perm_distance(bi * t)
               for t in Permutation.all(r))


def noise_pinning_exponent(sigma) -> int:
    """Reset noise pins towards the identity: weight ~ d^(-|sigma|)."""
    return -perm_distance(sigma)


# noise patterns and domain walls ----------------------------------------------------

@dataclass
class NoisePattern:
    L: int
    T: int
    events: np.ndarray  # (k, 2) integer rows (x, t)
    placement: str = "bulk"
    boundary: str = "periodic"

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=np.int64).reshape(-1, 2)
        if len(ev):
            if (ev[:, 0] < 0).any() or (ev[:, 0] >= self.L).any():
                raise ValueError("noise site outside [0, L)")
            if (ev[:, 1] < 0).any() or (ev[:, 1] >= self.T).any():
                raise ValueError("noise layer outside [0, T)")
            if len(np.unique(ev, axis=0)) != len(ev):
                raise ValueError("duplicate noise events")
        self.events = ev

    @property
    def count(self) -> int:
        return len(self.events)

    @classmethod
    def from_record(cls, record, config: CircuitConfig) -> "NoisePattern":
        return cls(config.L, config.T, record.noise_events, config.noise_placement, config.boundary)

    @classmethod
    def poisson(cls, L: int, T: int, q: float, rng: np.random.Generator, boundary="periodic") -> "NoisePattern":
        grid = rng.random((T, L)) < q
        t, x = np.nonzero(grid)
        return cls(L, T, np.column_stack([x, t]), boundary=boundary)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t"])
            w.writerows(self.events.tolist())

    @classmethod
    def from_csv(cls, path, L: int, T: int, **kwargs) -> "NoisePattern":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["x", "t"]:
            raise ValueError(f"{path}: expected header 'x,t'")
        try:
            ev = [(int(a), int(b)) for a, b in rows[1:]]
        except ValueError as exc:
            raise ValueError(f"{Path(path).name}: malformed noise row") from exc
        return cls(L, T, np.array(ev, dtype=np.int64).reshape(-1, 2), **kwargs)


def _distances(xs: np.ndarray, L: int, boundary: str) -> np.ndarray:
    """Matrix of distances between every site and each x in ``xs``: shape (L, len(xs))."""
    d = np.abs(np.arange(L)[:, None] - xs[None, :])
    if boundary == "periodic":
        d = np.minimum(d, L - d)
    return d


def topmost_mask(noise: NoisePattern) -> np.ndarray:
    """True for events not inside (or on) the downward light cone of another event."""
    ev = noise.events
    if len(ev) == 0:
        return np.zeros(0, dtype=bool)
    x, t = ev[:, 0], ev[:, 1]
    keep = np.ones(len(ev), dtype=bool)
    for start in range(0, len(ev), 2048):
        sl = slice(start, start + 2048)
        d = np.abs(x[sl, None] - x[None, :])
        if noise.boundary == "periodic":
            d = np.minimum(d, noise.L - d)
        inside = (t[None, :] - d) >= t[sl, None]  # other event i covers event j
        inside[np.arange(inside.shape[0]), np.arange(start, start + inside.shape[0])] = False
        keep[sl] = ~inside.any(axis=1)
    return keep


@dataclass
class DomainWall:
    L: int
    T: int
    boundary: str
    t_wall: np.ndarray  # per site, -inf where no cone reaches
    apexes: np.ndarray  # (k, 2) rows (x, t)
    length: int  # bonds whose two sites are both covered

    @property
    def empty(self) -> bool:
        return len(self.apexes) == 0


def build_domain_wall(noise: NoisePattern) -> DomainWall:
    """Upper envelope of downward light cones of the topmost noise events."""
    L = noise.L
    apexes = noise.events[topmost_mask(noise)]
    if len(apexes) == 0:
        return DomainWall(L, noise.T, noise.boundary, np.full(L, -np.inf), apexes, 0)
    env = (apexes[None, :, 1] - _distances(apexes[:, 0], L, noise.boundary)).max(axis=1).astype(float)
    covered = env >= 0
    if noise.boundary == "periodic":
        length = int(np.sum(covered & np.roll(covered, -1)))
    else:
        length = int(np.sum(covered[:-1] & covered[1:]))
    order = np.lexsort((apexes[:, 1], apexes[:, 0]))
    return DomainWall(L, noise.T, noise.boundary, env, apexes[order], length)


def apex_counts(L: int, T: int, q: float, n_patterns: int, rng: np.random.Generator,
                boundary: str = "periodic") -> np.ndarray:
    """Number of topmost events in each of ``n_patterns`` Bernoulli(q) patterns.

    Batched top-down sweep: an event is topmost iff nothing occupies the closed
    upward cone above it, and the upward cone of (x, t) is the point itself plus
    the cones of (x-1, t+1), (x, t+1), (x+1, t+1).
    """
    above = np.zeros((n_patterns, L), dtype=bool)
    counts = np.zeros(n_patterns, dtype=np.int64)
    for _ in range(T):
        row = rng.random((n_patterns, L)) < q
        if boundary == "periodic":
            shadow = above | np.roll(above, 1, axis=1) | np.roll(above, -1, axis=1)
        else:
            shadow = above.copy()
            shadow[:, 1:] |= above[:, :-1]
            shadow[:, :-1] |= above[:, 1:]
        counts += np.sum(row & ~shadow, axis=1)
        above = shadow | row
    return counts


# free energies --------------------------------------------------------------------

@dataclass
class PhasePrediction:
    dominant: str  # "all_C" or "wall"
    F_allC: float
    F_wall: float
    predicted_entropy: float
    predicted_mutual_information: float
    p_c: float | None
    details: dict = field(default_factory=dict)


def critical_p(config: CircuitConfig, s0: float = 1.0) -> float:
    """p at which the expected noise count q L T equals the wall cost s0 L."""
    return s0 * config.L**config.alpha / config.T


def _kpz(config: CircuitConfig, kpz_coefficient: float) -> float:
    if config.p_m <= 0 or config.p <= 0 or kpz_coefficient == 0:
        return 0.0
    return kpz_coefficient * (config.L / config.p) ** (1.0 / 3.0)


def _predict(config, F_allC, F_wall, s0, details) -> PhasePrediction:
    dominant = "wall" if F_wall < F_allC else "all_C"
    expected = config.q * config.L * config.T
    mi = max(0.0, s0 * config.L - expected)
    return PhasePrediction(dominant, float(F_allC), float(F_wall), float(min(F_allC, F_wall)),
                           float(mi), critical_p(config, s0), details)


def free_energy_compare(config: CircuitConfig, noise: NoisePattern, s0: float = 1.0,
                        kpz_coefficient: float = 0.0) -> PhasePrediction:
    """All-C configuration (pay one unit per noise) versus the light-cone wall."""
    wall = build_domain_wall(noise)
    F_allC = float(noise.count)
    F_wall = np.inf if wall.empty else s0 * wall.length + _kpz(config, kpz_coefficient)
    return _predict(config, F_allC, F_wall, s0,
                    {"wall_length": wall.length, "apexes": len(wall.apexes), "events": noise.count})


def expected_compare(config: CircuitConfig, s0: float = 1.0, kpz_coefficient: float = 0.0) -> PhasePrediction:
    """Same competition with the noise count replaced by its mean q L T and a full-width wall."""
    F_allC = config.q * config.L * config.T
    F_wall = s0 * config.L + _kpz(config, kpz_coefficient) if config.p > 0 else np.inf
    return _predict(config, F_allC, F_wall, s0, {"expected_events": F_allC})


def dominance_threshold(L: float, alpha: float, T_over_L: float = 4.0, s0: float = 1.0) -> float:
    """Smallest p for which the wall wins in :func:`expected_compare` (p_m = 0)."""
    return s0 * L**alpha / (T_over_L * L)


def boundary_scenario_compare(config: CircuitConfig, t0: int | None = None,
                              regime: float | None = None) -> PhasePrediction:
    """Left-boundary noise: wall anchored at t0 versus all spins fixed to C.

    For T/L < 1 the wall costs q t0 + (T - t0), never below the all-C cost q T,
    so there is no transition. For T/L >= 1 a wall of cost L competes with q T
    and the two cross at q T = L.
    """
    if config.noise_placement != "left_boundary":
        raise ConfigError("boundary_scenario_compare needs noise_placement='left_boundary'")
    L, T, q = config.L, config.T, config.q
    ratio = T / L if regime is None else float(regime)
    F_allC = q * T
    if ratio < 1:
        if t0 is None:
            t0s = np.arange(T)  # t0 = T is the all-C configuration itself
            costs = q * t0s + (T - t0s)
            best = int(np.argmin(costs))
            t0, F_wall = int(t0s[best]), float(costs[best])
        else:
            if not 0 <= t0 <= T:
                raise ValueError(f"t0 = {t0} outside [0, {T}]")
            F_wall = q * t0 + (T - t0)
        p_c = None
    else:
        F_wall = float(L)
        p_c = L / T  # in units of q
    dominant = "wall" if F_wall < F_allC else "all_C"
    return PhasePrediction(dominant, float(F_allC), float(F_wall), float(min(F_allC, F_wall)),
                           2.0 if dominant == "all_C" else 0.0, p_c,
                           {"T_over_L": ratio, "t0": t0, "q": q})


def sweep_predictions(config: CircuitConfig, ps, s0: float = 1.0, kpz_coefficient: float = 0.0):
    """``expected_compare`` over a grid of noise prefactors."""
    return [expected_compare(replace(config, p=float(p)), s0, kpz_coefficient) for p in ps]
