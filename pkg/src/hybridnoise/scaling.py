"""Finite-size scaling: data collapse, power-law fits, time rescaling, bootstrap.

The collapse objective is a local-linear master-curve residual. For every point
the four nearest points (in scaled x) belonging to other sizes are fitted by a
straight line; the squared deviation of the point from that line, weighted by
the combined errors, is averaged over all points that the line brackets.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

WINDOW = 4
PC_GRID = 200
NU_GRID = np.linspace(1.0, 4.0, 60)


@dataclass
class SweepTable:
    L: np.ndarray
    x: np.ndarray  # sweep parameter (p or p_m)
    y: np.ndarray  # mean observable
    err: np.ndarray  # standard error of the mean
    n: np.ndarray  # trajectories per row
    samples: list | None = None  # optional per-row trajectory values

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.err = np.asarray(self.err, dtype=float)
        self.n = np.asarray(self.n, dtype=np.int64)
        k = len(self.L)
        if not all(len(a) == k for a in (self.x, self.y, self.err, self.n)):
            raise ValueError("columns of unequal length")
        if self.samples is not None and len(self.samples) != k:
            raise ValueError("need one sample array per row")

    def __len__(self):
        return len(self.L)

    @property
    def sizes(self) -> np.ndarray:
        return np.unique(self.L)

    @classmethod
    def from_samples(cls, L, x, samples) -> "SweepTable":
        samples = [np.asarray(s, dtype=float) for s in samples]
        y = np.array([s.mean() for s in samples])
        err = np.array([s.std(ddof=1) / np.sqrt(len(s)) if len(s) > 1 else 0.0 for s in samples])
        return cls(L, x, y, err, [len(s) for s in samples], samples)

    @classmethod
    def from_csv(cls, path, observable: str, x_column: str = "p", **filters) -> "SweepTable":
        """Rows of one observable from a sweep CSV; ``filters`` select on other columns."""
        need = {"L", x_column, "observable", "mean", "stderr", "n_traj"}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise ValueError(f"{path}: CSV lacks columns {sorted(need - set(reader.fieldnames or []))}")
            rows = [r for r in reader if r["observable"] == observable
                    and all(np.isclose(float(r[k]), float(v)) for k, v in filters.items())]
        if not rows:
            raise ValueError(f"{path}: no rows for observable {observable!r}")
        return cls([float(r["L"]) for r in rows], [float(r[x_column]) for r in rows],
                   [float(r["mean"]) for r in rows], [float(r["stderr"]) for r in rows],
                   [int(r["n_traj"]) for r in rows])

    def select(self, mask) -> "SweepTable":
        mask = np.asarray(mask)
        samples = None if self.samples is None else [s for s, k in zip(self.samples, mask) if k]
        return SweepTable(self.L[mask], self.x[mask], self.y[mask], self.err[mask], self.n[mask], samples)

    def finite(self) -> "SweepTable":
        """Rows whose mean and error are finite (ratios of zero means are NaN)."""
        return self.select(np.isfinite(self.y) & np.isfinite(self.err))

    def with_error_floor(self, floor) -> "SweepTable":
        """Raise errors below ``floor`` (scalar or per row), e.g. for rows where every trajectory agrees."""
        out = self.select(np.ones(len(self), bool))
        out.err = np.maximum(out.err, np.broadcast_to(np.asarray(floor, dtype=float), out.err.shape))
        return out

    def validate(self, min_sizes: int = 3, min_points: int = 5) -> None:
        if (self.err <= 0).any():
            raise ValueError("standard errors must be positive")
        sizes = self.sizes
        if len(sizes) < min_sizes:
            raise ValueError(f"need at least {min_sizes} sizes, got {len(sizes)}")
        for s in sizes:
            if np.sum(self.L == s) < min_points:
                raise ValueError(f"size {s:g} has fewer than {min_points} sweep points")


@dataclass
class CollapseFit:
    p_c: float
    nu: float
    quality: float
    converged: bool = True
    bootstrap_sd: tuple | None = None  # (sd_pc, sd_nu)
    fixed_params: dict = field(default_factory=dict)
    rescale_power: float = 0.0

    def to_dict(self) -> dict:
        return {"p_c": self.p_c, "nu": self.nu, "quality": self.quality, "converged": self.converged,
                "bootstrap_sd": None if self.bootstrap_sd is None else list(self.bootstrap_sd),
                "fixed_params": self.fixed_params, "rescale_power": self.rescale_power}


def collapse_quality(table: SweepTable, p_c: float, nu: float, rescale_power: float = 0.0) -> float:
    """Master-curve residual of the rescaled data (smaller is better)."""
    if nu <= 0:
        return np.inf
    L = table.L
    X = (table.x - p_c) * L ** (1.0 / nu)
    scale = L ** (-rescale_power)
    Y = table.y * scale
    E = table.err * scale
    n = len(X)
    dist = np.abs(X[:, None] - X[None, :])
    dist[L[:, None] == L[None, :]] = np.inf
    k = min(WINDOW, n - 1)
    nbr = np.argpartition(dist, k - 1, axis=1)[:, :k]
    ok = np.isfinite(np.take_along_axis(dist, nbr, axis=1)).all(axis=1)
    xs, ys, es = X[nbr], Y[nbr], E[nbr]
    bracket = (xs.min(axis=1) <= X) & (X <= xs.max(axis=1)) & ok
    # local least-squares line through the k foreign neighbours
    xm, ym = xs.mean(axis=1), ys.mean(axis=1)
    sxx = ((xs - xm[:, None]) ** 2).sum(axis=1)
    sxy = ((xs - xm[:, None]) * (ys - ym[:, None])).sum(axis=1)
    good = bracket & (sxx > 0)
    if good.sum() < max(3, n // 4):
        return np.inf
    slope = np.where(good, sxy / np.where(sxx > 0, sxx, 1.0), 0.0)
    pred = ym + slope * (X - xm)
    var = E**2 + (es**2).mean(axis=1)
    var = np.where(var > 0, var, np.finfo(float).tiny)
    r2 = (Y - pred) ** 2 / var
    return float(r2[good].mean() * n / good.sum())


def collapse_fit(table: SweepTable, rescale_power: float = 0.0, fix_nu: float | None = None,
                 pc_range: tuple | None = None, pc_points: int = PC_GRID, nu_grid=NU_GRID) -> CollapseFit:
    """Coarse grid over (p_c, nu) followed by Nelder-Mead refinement."""
    table.validate()
    lo, hi = pc_range if pc_range is not None else (table.x.min(), table.x.max())
    pcs = np.linspace(lo, hi, pc_points)
    nus = np.array([fix_nu]) if fix_nu is not None else np.asarray(nu_grid, dtype=float)
    grid = np.array([[collapse_quality(table, pc, nu, rescale_power) for nu in nus] for pc in pcs])
    if not np.isfinite(grid).any():
        return CollapseFit(np.nan, np.nan, np.inf, False, fixed_params=_fixed(fix_nu),
                           rescale_power=rescale_power)
    i, j = np.unravel_index(np.nanargmin(grid), grid.shape)
    best = (float(pcs[i]), float(nus[j]), float(grid[i, j]))
    step = (hi - lo) / max(pc_points - 1, 1)

    if fix_nu is None:
        res = optimize.minimize(lambda v: collapse_quality(table, v[0], v[1], rescale_power),
                                x0=[best[0], best[1]], method="Nelder-Mead",
                                options={"xatol": 1e-5, "fatol": 1e-8, "maxiter": 2000,
                                         "initial_simplex": [[best[0], best[1]],
                                                             [best[0] + 2 * step, best[1]],
                                                             [best[0], best[1] + 0.1]]})
        cand = (float(res.x[0]), float(res.x[1]), float(res.fun))
    else:
        res = optimize.minimize_scalar(lambda v: collapse_quality(table, v, fix_nu, rescale_power),
                                       bounds=(best[0] - step, best[0] + step), method="bounded")
        cand = (float(res.x), float(fix_nu), float(res.fun))
    converged = bool(res.success)
    if cand[2] <= best[2]:
        best = cand
    return CollapseFit(best[0], best[1], best[2], converged, fixed_params=_fixed(fix_nu),
                       rescale_power=rescale_power)


def _fixed(fix_nu):
    return {} if fix_nu is None else {"nu": float(fix_nu)}


@dataclass
class PowerFit:
    exponent: float
    amplitude: float
    r2: float
    exponent_se: float
    n_points: int


def power_fit(scale, values, errors=None) -> PowerFit:
    """Least squares of log(values) against log(scale); nonpositive values are dropped."""
    scale = np.asarray(scale, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if not keep.all():
        warnings.warn(f"dropping {np.sum(~keep)} nonpositive values from the power fit", stacklevel=2)
    lx, ly = np.log(scale[keep]), np.log(values[keep])
    if len(np.unique(lx)) < 2:
        raise ValueError("need at least two distinct scales")
    w = None
    if errors is not None:
        rel = np.asarray(errors, dtype=float)[keep] / values[keep]
        w = np.where(rel > 0, 1.0 / rel, 1.0)
    coef, cov = np.polyfit(lx, ly, 1, w=w, cov="unscaled") if len(lx) > 2 else (np.polyfit(lx, ly, 1, w=w), None)
    pred = np.polyval(coef, lx)
    ss_res = np.sum((ly - pred) ** 2)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    se = float(np.sqrt(cov[0, 0])) if cov is not None else np.nan
    return PowerFit(float(coef[0]), float(np.exp(coef[1])), float(r2), se, int(len(lx)))


def power_fit_table(table: SweepTable) -> PowerFit:
    """Power fit of the observable against L/p over all rows of ``table``."""
    if len(table.sizes) < 4:
        raise ValueError("power fits need at least 4 sizes")
    return power_fit(table.L / table.x, table.y, table.err)


@dataclass
class DynamicsCurve:
    L: int
    p: float
    t: np.ndarray
    value: np.ndarray


@dataclass
class TimescaleResult:
    residuals: dict  # exponent -> master-curve residual
    best: float


def _curve_residual(curves, exponent: float, floor: float) -> float:
    """Mean squared mismatch between rescaled curves, restricted to the decay region."""
    taus = [c.t / (c.L / c.p) ** exponent for c in curves]
    total, count = 0.0, 0
    for i, (ti, ci) in enumerate(zip(taus, curves)):
        for j, (tj, cj) in enumerate(zip(taus, curves)):
            if i == j:
                continue
            inside = (ti >= tj.min()) & (ti <= tj.max())
            if not inside.any():
                continue
            other = np.interp(ti[inside], tj, cj.value)
            mine = ci.value[inside]
            live = np.maximum(mine, other) > floor / 2  # drop the common zero tail
            total += np.sum((mine[live] - other[live]) ** 2)
            count += int(live.sum())
    return total / count if count else np.inf


def timescale_collapse(curves, exponents=(1 / 3, 1 / 2, 1.0), floor: float = 0.1) -> TimescaleResult:
    """Compare master-curve residuals of value(t) against t / (L/p)^exponent."""
    curves = [DynamicsCurve(c.L, c.p, np.asarray(c.t, float), np.asarray(c.value, float)) for c in curves]
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    for c in curves:
        if c.value.min() > floor:
            raise ValueError(f"curve L={c.L}, p={c.p} never decays below {floor}; run longer")
    res = {float(e): _curve_residual(curves, e, floor) for e in exponents}
    return TimescaleResult(res, min(res, key=res.get))


def bootstrap(table: SweepTable, fit, resamples: int = 200, seed: int = 0) -> dict:
    """Resample trajectories within each row, refit, and report parameter SDs.

    ``fit`` maps a :class:`SweepTable` to a dict of named parameters.
    """
    if resamples < 100:
        raise ValueError("use at least 100 resamples")
    if table.samples is None:
        raise ValueError("bootstrap needs per-trajectory samples")
    streams = np.random.SeedSequence(seed).spawn(resamples)
    draws = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        samples = [s[rng.integers(0, len(s), len(s))] for s in table.samples]
        t = SweepTable.from_samples(table.L, table.x, samples)
        t.err = np.where(t.err > 0, t.err, table.err)  # keep weights finite for degenerate rows
        draws.append(fit(t))
    keys = draws[0].keys()
    return {k: float(np.std([d[k] for d in draws], ddof=1)) for k in keys}


def crossing_points(table: SweepTable, rescale_power: float = 0.0) -> list[tuple]:
    """Linear-interpolated crossings of consecutive-size curves."""
    out = []
    sizes = table.sizes
    for a, b in zip(sizes[:-1], sizes[1:]):
        ta, tb = table.select(table.L == a), table.select(table.L == b)
        xs = np.intersect1d(ta.x, tb.x)
        ya = np.array([ta.y[ta.x == x][0] for x in xs]) * a ** (-rescale_power)
        yb = np.array([tb.y[tb.x == x][0] for x in xs]) * b ** (-rescale_power)
        diff = yb - ya
        for k in range(len(xs) - 1):
            if diff[k] == 0:
                out.append((a, b, float(xs[k])))
            elif diff[k] * diff[k + 1] < 0:
                out.append((a, b, float(xs[k] - diff[k] * (xs[k + 1] - xs[k]) / (diff[k + 1] - diff[k]))))
    return out
