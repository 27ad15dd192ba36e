import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridnoise.scaling import (
    DynamicsCurve,
    SweepTable,
    bootstrap,
    collapse_fit,
    collapse_quality,
    crossing_points,
    power_fit,
    power_fit_table,
    timescale_collapse,
)

SIZES = (16, 32, 64, 128)


def synthetic(p_c=0.06, nu=2.0, power=1 / 3, sigma=0.01, seed=0, ps=np.linspace(0.02, 0.12, 11)):
    rng = np.random.default_rng(seed)
    L = np.repeat(SIZES, len(ps)).astype(float)
    x = np.tile(ps, len(SIZES))
    y = np.tanh(-(x - p_c) * L ** (1 / nu)) * L**power + 2 * L**power
    y = y + rng.normal(0, sigma, len(y)) * L**power
    return SweepTable(L, x, y, np.full(len(y), sigma) * L**power, np.full(len(y), 100))


def test_recovers_planted_parameters():
    fit = collapse_fit(synthetic(), rescale_power=1 / 3)
    assert abs(fit.p_c - 0.06) < 0.005 and abs(fit.nu - 2) < 0.2


def test_fixed_nu():
    fit = collapse_fit(synthetic(p_c=0.08), rescale_power=1 / 3, fix_nu=2.0)
    assert fit.nu == 2.0 and fit.fixed_params == {"nu": 2.0}
    assert abs(fit.p_c - 0.08) < 0.005


def test_returned_optimum_beats_grid():
    t = synthetic(seed=3)
    fit = collapse_fit(t, rescale_power=1 / 3)
    for pc in np.linspace(0.02, 0.12, 25):
        for nu in np.linspace(1, 4, 13):
            assert fit.quality <= collapse_quality(t, pc, nu, 1 / 3) + 1e-12


def test_quality_smaller_at_truth():
    t = synthetic(sigma=1e-4)
    assert collapse_quality(t, 0.06, 2.0, 1 / 3) < collapse_quality(t, 0.09, 2.0, 1 / 3)
    assert collapse_quality(t, 0.06, 2.0, 1 / 3) < collapse_quality(t, 0.06, 3.5, 1 / 3)


def test_invariant_under_relabel_and_scale():
    t = synthetic(seed=5)
    perm = np.random.default_rng(1).permutation(len(t))
    shuffled = SweepTable(t.L[perm], t.x[perm], t.y[perm], t.err[perm], t.n[perm])
    scaled = SweepTable(t.L, t.x, 3.7 * t.y, 3.7 * t.err, t.n)
    a = collapse_fit(t, 1 / 3, fix_nu=2.0)
    b = collapse_fit(shuffled, 1 / 3, fix_nu=2.0)
    c = collapse_fit(scaled, 1 / 3, fix_nu=2.0)
    assert a.p_c == pytest.approx(b.p_c, abs=1e-9) and a.p_c == pytest.approx(c.p_c, abs=1e-9)


def test_validation():
    t = synthetic()
    with pytest.raises(ValueError):
        collapse_fit(t.select(t.L < 64))
    with pytest.raises(ValueError):
        collapse_fit(t.select(t.x < 0.05))
    bad = SweepTable(t.L, t.x, t.y, np.zeros(len(t)), t.n)
    with pytest.raises(ValueError):
        collapse_fit(bad)


def test_crossing_points():
    t = synthetic(sigma=0.0 + 1e-9)
    cross = crossing_points(SweepTable(t.L, t.x, t.y * t.L ** (-1 / 3) - 2 + 0 * t.x, t.err, t.n))
    assert cross and all(abs(c - 0.06) < 0.011 for *_, c in cross)


# power fits ---------------------------------------------------------------------

def test_power_fit_exact_cube_root():
    s = np.array([10.0, 40, 160, 640, 2560])
    fit = power_fit(s, 1.7 * s ** (1 / 3))
    assert abs(fit.exponent - 1 / 3) < 1e-6 and fit.amplitude == pytest.approx(1.7) and fit.r2 > 0.999999


def test_power_fit_drops_nonpositive():
    s = np.array([1.0, 2, 4, 8, 16])
    with pytest.warns(UserWarning):
        fit = power_fit(s, np.array([0.0, 2, 4, 8, 16]))
    assert fit.n_points == 4 and fit.exponent == pytest.approx(1.0)


def test_power_fit_table_requires_four_sizes():
    t = SweepTable([16, 32, 64], [0.2] * 3, [1, 2, 3], [0.1] * 3, [10] * 3)
    with pytest.raises(ValueError):
        power_fit_table(t)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 1.0), st.integers(0, 10**6))
def test_power_fit_recovers_slope_within_bootstrap(beta, seed):
    rng = np.random.default_rng(seed)
    L = np.array([16.0, 32, 64, 128])
    samples = [L_i**beta * (1 + 0.05 * rng.standard_normal(200)) for L_i in L]
    t = SweepTable.from_samples(L, np.ones(4), samples)
    sd = bootstrap(t, lambda tt: {"b": power_fit(tt.L, tt.y).exponent}, resamples=100, seed=seed)["b"]
    est = power_fit(t.L, t.y).exponent
    assert abs(est - beta) <= 3 * sd + 1e-9


# time rescaling ------------------------------------------------------------------

def _curves(exponent):
    out = []
    for L in (16, 32, 64):
        for p in (0.5, 1.0):
            t = np.arange(0, 1200, 2.0)
            out.append(DynamicsCurve(L, p, t, 2 * np.exp(-t / (L / p) ** exponent)))
    return out


@pytest.mark.parametrize("true", [1 / 3, 1 / 2, 1.0])
def test_timescale_prefers_true_exponent(true):
    res = timescale_collapse(_curves(true))
    assert res.best == pytest.approx(true)
    others = [v for k, v in res.residuals.items() if k != res.best]
    assert res.residuals[res.best] < 0.1 * min(others)


def test_timescale_rejects_short_curves():
    c = [DynamicsCurve(16, 1.0, np.arange(5.0), np.full(5, 2.0))] * 2
    with pytest.raises(ValueError):
        timescale_collapse(c)


# bootstrap ------------------------------------------------------------------------

def _mean_fit(t):
    return {"mean": float(np.mean(np.concatenate(t.samples)))}


def test_bootstrap_zero_noise():
    t = SweepTable.from_samples([16, 32], [0.1, 0.1], [np.full(50, 1.0), np.full(50, 2.0)])
    t.err[:] = 1.0
    sd = bootstrap(t, _mean_fit, resamples=100)
    assert sd["mean"] == 0.0


def test_bootstrap_sd_scales_with_sample_size():
    rng = np.random.default_rng(2)
    sigma = 0.5
    for n in (100, 400):
        t = SweepTable.from_samples([16], [0.1], [rng.normal(0, sigma, n)])
        sd = bootstrap(t, _mean_fit, resamples=400, seed=n)["mean"]
        assert sd == pytest.approx(sigma / np.sqrt(n), rel=0.2)


def test_bootstrap_needs_resamples():
    t = SweepTable.from_samples([16], [0.1], [np.ones(5)])
    with pytest.raises(ValueError):
        bootstrap(t, _mean_fit, resamples=10)


def test_finite_and_error_floor():
    t = SweepTable([8, 8, 16], [0.1, 0.2, 0.1], [1.0, np.nan, 2.0], [0.0, 0.1, 0.3], [10, 10, 10])
    f = t.finite()
    assert len(f) == 2 and np.isnan(t.y[1])
    g = f.with_error_floor(0.2)
    assert g.err.tolist() == [0.2, 0.3] and f.err.tolist() == [0.0, 0.3]
