import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaussex.constants import (
    ConstantEstimate,
    generalized_piterbarg_estimate,
    hw_bounds,
    hw_estimate,
    known_constants,
    known_value,
    lagrange_weights_at_zero,
    lambda_extrapolate,
    pickands_estimate,
    piterbarg_estimate,
    required_horizon,
    richardson_weights,
)
from gaussex.core import fbm_kernel, subfbm_kernel
from gaussex.errors import DomainError, UsageError
from gaussex.models import PerfTableSpec


def test_known_constants_table():
    kinds = {(r["kind"], r["source"]) for r in known_constants()}
    assert len(kinds) == 4
    assert known_value("pickands", 1.0) == 1.0
    assert known_value("pickands", 2.0) == pytest.approx(math.pi**-0.5)
    assert known_value("piterbarg", 1.0, 3.0) == pytest.approx(4 / 3)
    assert known_value("pickands", 0.5) is None
    assert known_value("h_w", spec=PerfTableSpec(2, 1.0, (1, 1, 1))) == 1.0


def test_hw_bounds():
    lo, hi = hw_bounds(PerfTableSpec(2, 1.0, (1, 0.5, 1)))
    assert lo == 1.0 and hi == pytest.approx(2 * (1 + 4 / 0.75))


@given(st.floats(0.2, 2.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_richardson_exact_on_model(alpha, c0, c1, c2):
    meshes = [0.02, 0.04, 0.08]
    f = lambda h: c0 + c1 * h ** (alpha / 2) + c2 * h**alpha
    w = richardson_weights(meshes, (alpha / 2, alpha))
    assert sum(w) == pytest.approx(1.0)
    assert np.dot(w, [f(h) for h in meshes]) == pytest.approx(c0, abs=1e-8)


def test_lagrange_two_points_is_slope():
    w = lagrange_weights_at_zero([10.0, 20.0])
    h1, h2 = 0.7, 0.9
    assert np.dot(w, [h1, h2]) == pytest.approx((20 * h2 - 10 * h1) / 10)


def _est(value, lam, kind="pickands", mesh=0.02, stderr=0.01):
    return ConstantEstimate(value, stderr, lam, mesh, 100, False, kind)


def test_lambda_extrapolate_examples():
    e = lambda_extrapolate([_est(0.8, 10), _est(0.8, 20)])
    assert e.value == pytest.approx(0.8) and e.extrapolated
    assert e.stderr == pytest.approx(math.sqrt((1 * 0.01) ** 2 + (2 * 0.01) ** 2))
    p = lambda_extrapolate([_est(2.1, 4, "piterbarg"), _est(2.05, 8, "piterbarg")])
    assert p.value == 2.05 and p.lam == 8
    with pytest.raises(UsageError):
        lambda_extrapolate([_est(1, 10), _est(1, 20, "piterbarg")])
    with pytest.raises(UsageError):
        lambda_extrapolate([_est(1, 10), _est(1, 20, mesh=0.01)])
    with pytest.raises(UsageError):
        lambda_extrapolate([_est(1, 20), _est(1, 10)])
    with pytest.raises(UsageError):
        lambda_extrapolate([_est(1, 20)])


def test_estimate_serialisation():
    e = _est(1.2, 5)
    d = e.to_dict()
    assert d["lambda"] == 5 and "lam" not in d
    assert ConstantEstimate.from_dict(d) == e
    with pytest.raises(UsageError):
        _est(1.0, 5, kind="nope")
    with pytest.raises(DomainError):
        _est(float("nan"), 5)


def test_pickands_guards():
    with pytest.raises(UsageError):
        pickands_estimate(1.0, lam=5.0, mesh=0.03)
    with pytest.raises(UsageError):
        pickands_estimate(1.0, lam=0.5, mesh=0.05)
    with pytest.raises(UsageError):
        pickands_estimate(1.0, lam=5.0, mesh=0.2)


def test_pickands_alpha1_small():
    e = pickands_estimate(1.0, lam=5.0, mesh=0.05, n_reps=4000, seed=1, extrapolated=True)
    assert e.value > 0 and math.isfinite(e.stderr)
    assert abs(e.value - 1.0) < 0.1
    assert e.extrapolated and e.params["lambdas"] == [5.0, 10.0]


def test_pickands_deterministic():
    a = pickands_estimate(1.5, lam=4.0, mesh=0.05, n_reps=1000, seed=9)
    b = pickands_estimate(1.5, lam=4.0, mesh=0.05, n_reps=1000, seed=9, threads=2)
    assert a == b


def test_pickands_half_self_consistency():
    a = pickands_estimate(0.5, lam=5.0, mesh=0.05, n_reps=4000, seed=3, extrapolated=True)
    b = pickands_estimate(0.5, lam=10.0, mesh=0.025, n_reps=4000, seed=4, extrapolated=True)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_subadditivity():
    # window totals lambda * H[0, lambda] from raw (single-level) estimates, shared seed
    tot = {}
    err = {}
    for lam in (5.0, 10.0, 15.0):
        e = pickands_estimate(1.0, lam=lam, mesh=0.05, n_reps=3000, seed=2, levels=1)
        tot[lam], err[lam] = lam * e.value, lam * e.stderr
    slack = 3 * math.sqrt(err[5.0] ** 2 + err[10.0] ** 2 + err[15.0] ** 2)
    assert tot[15.0] <= tot[5.0] + tot[10.0] + slack


def test_refinement_monotone():
    coarse = pickands_estimate(1.0, lam=4.0, mesh=0.1, n_reps=3000, seed=5, levels=1, tilted=False)
    fine = pickands_estimate(1.0, lam=4.0, mesh=0.05, n_reps=3000, seed=5, levels=1, tilted=False)
    assert fine.value >= coarse.value - 3 * math.hypot(fine.stderr, coarse.stderr)


def test_required_horizon_and_guard():
    S = required_horizon(1.0, 1.0)
    assert S == pytest.approx(math.log(100) + math.log(2))
    with pytest.raises(UsageError, match="need S"):
        piterbarg_estimate(1.0, 0.1, horizon=8.0)
    with pytest.raises(UsageError):
        piterbarg_estimate(1.0, -1.0)


def test_piterbarg_small_and_monotone_in_b():
    vals = [piterbarg_estimate(1.0, b, horizon=12.0, mesh=0.05, n_reps=3000, seed=1) for b in (0.5, 1.0, 4.0)]
    for v in vals:
        assert v.value >= 1.0
    assert vals[0].value >= vals[1].value >= vals[2].value
    assert vals[0].raw_value >= vals[1].raw_value >= vals[2].raw_value
    assert abs(vals[1].value - 2.0) < 0.3


def test_generalized_matches_piterbarg_for_fbm():
    a = piterbarg_estimate(1.0, 1.0, horizon=8.0, mesh=0.05, n_reps=1000, seed=3)
    b = generalized_piterbarg_estimate(fbm_kernel(1.0), 1.0, 1.0, horizon=8.0, mesh=0.05, n_reps=1000, seed=3)
    assert (a.value, a.stderr) == (b.value, b.stderr)
    assert b.kind == "generalized_piterbarg"


def test_generalized_subfbm_baseline():
    e = generalized_piterbarg_estimate(subfbm_kernel(1.0), 1.0, 1.0, horizon=8.0, mesh=0.05, n_reps=2000, seed=1)
    assert e.value >= 1.0
    with pytest.raises(UsageError):
        generalized_piterbarg_estimate(subfbm_kernel(1.0), 0.5, 1.0)


def test_hw_guards():
    with pytest.raises(UsageError):
        hw_estimate(PerfTableSpec(4, 1.0, (1, 1, 1, 1, 1)))
    with pytest.raises(UsageError):
        hw_estimate(PerfTableSpec(1, 0.5, (1, 1)))


def test_hw_n1_matches_piterbarg_oracle():
    # n = 1, a = (1, a2): sqrt2 W(x) - x = sqrt(1 + a2^2) B(x) - x, so H_W = 1 + (1 + a2^2) / (1 - a2^2)
    spec = PerfTableSpec(1, 1.0, (1.0, 0.5))
    e = hw_estimate(spec, lam=8.0, mesh=0.05, n_reps=4000, seed=2)
    exact = 1 + 1.25 / 0.75
    assert not e.extrapolated
    assert abs(e.value - exact) < max(0.15 * exact, 4 * e.stderr)


def test_hw_full_weights_small():
    e = hw_estimate(PerfTableSpec(1, 1.0, (1, 1)), lam=4.0, mesh=0.05, n_reps=3000, seed=4, extrapolate_from=(1.0, 2.0))
    assert e.extrapolated and abs(e.value - 1.0) < 0.15
