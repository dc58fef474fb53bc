import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaussex.asymptotics import AsymptoticFormula, perf_table_formula
from gaussex.core import fbm_kernel
from gaussex.errors import UsageError
from gaussex.grids import interval_grid, points_grid, simplex_grid
from gaussex.harness import (
    ResultRecord,
    chi_model,
    estimate_tail,
    kernel_model,
    max_feasible_u,
    perf_table_model,
    ratio_table,
    wilson_interval,
)
from gaussex.models import ChiSpec, OptimizerReport, PerfTableSpec


@given(st.integers(0, 1000), st.integers(1, 1000))
def test_wilson_contains_point(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_shrinks():
    w = [np.subtract(*wilson_interval(n // 40, n)[::-1]) for n in (400, 4000, 40000)]
    assert w[0] > w[1] > w[2]


@pytest.mark.parametrize("p", [0.001, 0.025])
def test_wilson_coverage(p):
    rng = np.random.default_rng(123)
    n = 20000
    ks = rng.binomial(n, p, size=1000)
    cover = np.mean([lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in ks)])
    assert cover >= 0.93


def test_tail_single_point_oracle():
    model = kernel_model(fbm_kernel(1.0))
    t = estimate_tail(model, points_grid([1.0]), 1.959964, 100_000, seed=1)
    assert abs(t.p_hat - 0.025) < 0.003
    assert t.ci_lo <= t.p_hat <= t.ci_hi
    assert estimate_tail(model, points_grid([1.0]), -1e6, 1000, seed=1).p_hat == 1.0


def test_tail_nested_grids_monotone():
    spec = PerfTableSpec(1, 1.5, (1, 0.5))
    model = perf_table_model(spec)
    coarse = simplex_grid(1, 0.1)
    fine = simplex_grid(1, 0.05)
    # share the Gaussian values on the coarse points: sample on the fine grid
    # and restrict, which is what nesting means pathwise
    from gaussex.core import build_covariance_matrix, cholesky_factor, map_blocks

    L = cholesky_factor(build_covariance_matrix(model.kernel, fine)).factor
    idx = fine.index_of(coarse.points)
    both = np.vstack(map_blocks(L, 5000, 3, lambda v, rng: np.stack([v.max(1), v[:, idx].max(1)], 1)))
    assert np.all(both[:, 0] >= both[:, 1])
    # estimate_tail on the fine grid dominates the coarse one for the same seed stream
    u = 2.0
    assert (both[:, 0] > u).mean() >= (both[:, 1] > u).mean()


def test_coverage_check():
    model = perf_table_model(PerfTableSpec(2, 1.5, (1, 0.5, 1)))
    far = points_grid([[0.3, 0.5], [0.4, 0.6]], kind="simplex", mesh=0.1)
    with pytest.raises(UsageError, match="optimizer"):
        estimate_tail(model, far, 2.0, 10, seed=0)
    estimate_tail(model, simplex_grid(2, 0.1), 2.0, 10, seed=0)


def test_ratio_table_guard_reports_feasible_u():
    model = chi_model(ChiSpec(2, 1.0, 1.0, 1.0))
    f = AsymptoticFormula(5.013, 1.0)
    umax = max_feasible_u(f, 1000)
    assert f.evaluate(umax) == pytest.approx(10 / 1000, rel=1e-6)
    with pytest.raises(UsageError, match="largest feasible u"):
        ratio_table(model, f, [2.0, 4.0], interval_grid(0, 1, 0.1), 1000, seed=0)
    with pytest.raises(UsageError):
        ratio_table(model, f, [2.0, 2.0], interval_grid(0, 1, 0.1), 1000, seed=0)


def test_ratio_table_record():
    spec = PerfTableSpec(2, 1.5, (1, 0.5, 1))
    rec = ratio_table(perf_table_model(spec), perf_table_formula(spec), [2.0, 2.5], simplex_grid(2, 0.05), 20000,
                      seed=4, config_hash="abc", timestamp="t0")
    for r in rec.rows:
        assert r["ratio"] == pytest.approx(r["p_hat"] / r["asymptotic"], rel=0, abs=0)
        assert math.isfinite(r["ratio"]) and r["asymptotic"] > 0
        assert r["ratio_lo"] <= r["ratio"] <= r["ratio_hi"]
    assert ResultRecord.from_dict(rec.to_dict()) == rec
    rec2 = ratio_table(perf_table_model(spec), perf_table_formula(spec), [2.0, 2.5], simplex_grid(2, 0.05), 20000,
                       seed=4, config_hash="abc", timestamp="t0")
    assert rec2.to_dict() == rec.to_dict()


def test_ratio_table_flags_mismatch():
    spec = PerfTableSpec(2, 1.5, (1, 0.5, 1))
    wrong = AsymptoticFormula(100.0, 0.0)
    rec = ratio_table(perf_table_model(spec), wrong, [1.0], simplex_grid(2, 0.1), 5000, seed=0)
    assert rec.rows[0]["flag"] and rec.warnings


def test_chi_model_sampler_matches_direct():
    spec = ChiSpec(1, 1.0, 1.0, 1.0)
    t = estimate_tail(chi_model(spec), points_grid([0.0]), 1.959964, 50_000, seed=2)
    assert abs(t.p_hat - 0.05) < 0.006


def test_slepian_tail_against_exact_law():
    # alpha = 1, n = 1, a = (1, 1): covariance 1 - |s - t| on [0, 1], whose sup law is closed form
    from scipy.stats import norm

    u = 1.5
    exact = norm.sf(u) * (1 + norm.cdf(u)) + norm.pdf(u) * (u * norm.cdf(u) + norm.pdf(u))
    model = perf_table_model(PerfTableSpec(1, 1.0, (1.0, 1.0)))
    coarse, fine = (estimate_tail(model, simplex_grid(1, h), u, 40_000, seed=3) for h in (0.01, 0.0025))
    # grid sups undershoot the continuous sup, and refining closes the gap
    assert fine.ci_lo <= exact and coarse.ci_lo <= exact
    assert fine.p_hat > coarse.p_hat
    assert fine.p_hat >= 0.92 * exact
