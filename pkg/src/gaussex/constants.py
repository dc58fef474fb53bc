"""Monte Carlo estimators for Pickands-type constants.

All estimators evaluate a discretised sup-exponential functional

    F = max_k exp(sqrt(2) Y_k - d_k)

on nested lattices of spacing mesh, 2 mesh, 4 mesh, ... taken from the same
sample paths, then remove the leading discretisation bias by Richardson
extrapolation in the mesh with exponents (alpha/2, alpha).

Pickands-type constants (horizon-normalised) use an exact change-of-measure
representation: the mixture over tau of the shifts Y -> Y + sqrt(2) Cov(., Y_tau)
has likelihood ratio L = mean_tau exp(sqrt(2) Y_tau - Var Y_tau), hence
E F = E_Q[F / L].  Because F / L is bounded by the number of mixture points,
the variance is orders of magnitude below the direct estimator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CovarianceKernel, cholesky_factor, fbm_kernel, map_blocks
from .errors import DomainError, UsageError
from .grids import hyperrectangle_grid, interval_grid
from .models import PerfTableSpec, w_covariance, w_drift

KINDS = ("pickands", "piterbarg", "generalized_piterbarg", "h_w")
HW_MAX_N = 3
HW_MAX_POINTS = 12_000
TRUNCATION_TOL = 1e-2
HW_SUBWINDOWS = (0.2, 7.0 / 15.0)
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    stderr: float
    lam: float
    mesh: float
    n_reps: int
    extrapolated: bool
    kind: str
    alpha: float = 1.0
    b: Optional[float] = None
    levels: int = 1
    mesh_corrected: bool = False
    raw_value: Optional[float] = None
    truncation_sensitivity: float = 0.0
    method: str = "direct"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown constant kind '{self.kind}'")
        if not math.isfinite(self.value) or not math.isfinite(self.stderr):
            raise DomainError("constant estimate must be finite")

    def ci(self, z: float = 1.959963984540054) -> tuple:
        return (self.value - z * self.stderr, self.value + z * self.stderr)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantEstimate":
        d = dict(d)
        d["lam"] = d.pop("lambda")
        return cls(**d)


# ---------------------------------------------------------------------------
# closed forms


_KNOWN = (
    ("pickands", {"alpha": 1.0}, 1.0, "H_{B^1} = 1"),
    ("pickands", {"alpha": 2.0}, 1.0 / math.sqrt(math.pi), "H_{B^2} = pi^{-1/2}"),
    ("piterbarg", {"alpha": 1.0, "b": "c"}, "1 + 1/c", "P^c_{B^1} = 1 + 1/c"),
    ("h_w", {"m": "n+1"}, 1.0, "H_W = 1 when every weight equals 1"),
)


def known_constants() -> list:
    """Static table of (kind, parameters, exact value, source)."""
    return [dict(kind=k, params=dict(p), value=v, source=s) for k, p, v, s in _KNOWN]


def known_value(kind: str, alpha: float = 1.0, b: Optional[float] = None, spec: Optional[PerfTableSpec] = None):
    """Exact value of a constant when one is known, else None."""
    if kind == "pickands":
        if alpha == 1.0:
            return 1.0
        if alpha == 2.0:
            return 1.0 / math.sqrt(math.pi)
    elif kind in ("piterbarg", "generalized_piterbarg"):
        if alpha == 1.0 and b is not None and b > 0 and kind == "piterbarg":
            return 1.0 + 1.0 / b
    elif kind == "h_w" and spec is not None and spec.m == spec.n + 1:
        return 1.0
    return None


def hw_bounds(spec: PerfTableSpec) -> tuple:
    """1 <= H_W <= n^{m-1} prod_{N^c} (1 + 2n / (1 - a_i^2))."""
    upper = float(spec.n ** (spec.m - 1))
    for i in spec.Nc:
        upper *= 1.0 + 2.0 * spec.n / (1.0 - spec.a[i - 1] ** 2)
    return 1.0, upper


# ---------------------------------------------------------------------------
# shared machinery


def richardson_weights(meshes: Sequence[float], exponents: Sequence[float]) -> np.ndarray:
    """Weights w with sum_l w_l f(h_l) = f(0) for f = c0 + sum_e c_e h^e."""
    meshes = np.asarray(meshes, dtype=float)
    k = len(meshes)
    if k == 1:
        return np.ones(1)
    exps = list(exponents)[: k - 1]
    A = np.column_stack([np.ones(k)] + [meshes**e for e in exps])
    e0 = np.zeros(k)
    e0[0] = 1.0
    return np.linalg.solve(A.T, e0)


def lagrange_weights_at_zero(lams: Sequence[float]) -> np.ndarray:
    """Weights of the polynomial in 1/lambda through the points, evaluated at 1/lambda = 0."""
    h = 1.0 / np.asarray(lams, dtype=float)
    k = len(h)
    return np.array([np.prod([-h[j] / (h[i] - h[j]) for j in range(k) if j != i]) for i in range(k)])


def _coarse_mask(index: np.ndarray, step: int) -> np.ndarray:
    """Rows whose integer lattice coordinates are all multiples of ``step``."""
    return np.all(index % step == 0, axis=1)


def _mean_stderr(v: np.ndarray) -> tuple:
    vals = np.asarray(v, dtype=float)
    mean = math.fsum(vals.tolist()) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    dev = vals - mean
    var = math.fsum((dev * dev).tolist()) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def _truncation_sensitivity(v: np.ndarray) -> float:
    """Relative change of the mean when values above the 0.999-quantile are clipped."""
    mean = math.fsum(v.tolist()) / len(v)
    if mean == 0:
        return 0.0
    q = np.quantile(v, 0.999)
    clipped = math.fsum(np.minimum(v, q).tolist()) / len(v)
    return float(abs(mean - clipped) / abs(mean))


def _sup_exp_table(cov, drift, variance, eval_masks, mix, n_reps, seed, stream, tilted, threads) -> np.ndarray:
    """Per-replication sup-exponentials over each evaluation set, shape (n_reps, sets).

    ``cov`` is the covariance on the nonzero-variance lattice points; the
    origin (Y = 0, drift 0) belongs to every set and contributes exp(0) = 1 to
    every maximum.  With ``tilted`` the paths come from the mixture of shifts
    over the points ``mix`` plus the origin and are reweighted exactly.
    """
    chol = cholesky_factor(cov)
    mix = np.asarray(mix, dtype=int)
    shift = SQRT2 * cov[mix]
    n_mix = len(mix) + 1

    def fn(vals, rng):
        rows = vals.shape[0]
        if tilted:
            pick = rng.integers(0, n_mix, size=rows)
            moved = pick < len(mix)
            vals = vals.copy()
            vals[moved] += shift[pick[moved]]
            lw = SQRT2 * vals[:, mix] - variance[mix]
            top = np.maximum(lw.max(axis=1), 0.0)
            log_l = top + np.log((np.exp(lw - top[:, None]).sum(axis=1) + np.exp(-top)) / n_mix)
        else:
            log_l = np.zeros(rows)
        expo = SQRT2 * vals - drift
        out = np.empty((rows, len(eval_masks)))
        for c, mask in enumerate(eval_masks):
            F = np.maximum(expo[:, mask].max(axis=1), 0.0)
            out[:, c] = np.exp(F - log_l)
        return out

    return np.vstack(map_blocks(chol.factor, n_reps, seed, fn, stream=stream, threads=threads))


def _levels_for(length: float, mesh: float, requested: int) -> int:
    """Largest level count <= requested such that 2^(L-1) mesh still divides length."""
    L = max(1, int(requested))
    while L > 1:
        k = length / (mesh * 2 ** (L - 1))
        if abs(k - round(k)) <= 1e-9:
            break
        L -= 1
    return L


def _check_divides(length: float, step: float, what: str):
    k = length / step
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise UsageError(f"mesh {step:g} must divide {what} {length:g}")


def _window_table(X, cov, drift, variance, windows, mesh, levels, n_reps, seed, stream, tilted, threads, window_cols=None, mix_level=0):
    """Sup-exponentials for every (window, mesh level) pair from one set of paths.

    Window k restricts the coordinates ``window_cols`` (default: all) to
    [0, windows[k]]; level l keeps lattice points whose integer coordinates
    are multiples of 2^l.  Returns shape (n_reps, K, L) and L.
    """
    index = np.rint(X / mesh).astype(int)
    L = min(_levels_for(w, mesh, levels) for w in windows)
    cols = list(range(X.shape[1])) if window_cols is None else list(window_cols)
    masks = []
    for w in windows:
        inside = np.all(X[:, cols] <= w + 1e-9, axis=1)
        for l in range(L):
            masks.append(inside & _coarse_mask(index, 2**l))
    mix = np.flatnonzero(masks[(len(windows) - 1) * L + min(mix_level, L - 1)])
    table = _sup_exp_table(cov, drift, variance, masks, mix, n_reps, seed, stream, tilted, threads)
    return table.reshape(n_reps, len(windows), L), L


def _combine(table, windows, power, mesh, exponents, **kw) -> ConstantEstimate:
    """Richardson in the mesh, then the 1/lambda polynomial, applied per replication."""
    n_reps, K, L = table.shape
    wr = richardson_weights([mesh * 2**l for l in range(L)], exponents)
    scale = np.asarray(windows, dtype=float) ** power
    per_window = (table @ wr) / scale
    raw_window = table[:, :, 0] / scale
    wl = lagrange_weights_at_zero(windows) if K > 1 else np.ones(1)
    value, stderr = _mean_stderr(per_window @ wl)
    raw, _ = _mean_stderr(raw_window[:, -1])
    params = dict(kw.pop("params", {}))
    if K > 1:
        params.update(
            lambdas=[float(w) for w in windows],
            lambda_weights=wl.tolist(),
            window_values=[_mean_stderr(per_window[:, k])[0] for k in range(K)],
        )
    return ConstantEstimate(
        value=value,
        stderr=stderr,
        lam=float(windows[-1]),
        mesh=mesh,
        n_reps=n_reps,
        extrapolated=K > 1,
        levels=L,
        mesh_corrected=L > 1,
        raw_value=raw,
        truncation_sensitivity=_truncation_sensitivity(raw_window[:, -1]),
        params=params,
        **kw,
    )


def _stream(kind: str) -> tuple:
    return (KINDS.index(kind),)


def _positive_lattice(kernel: CovarianceKernel, horizon: float, mesh: float):
    t = interval_grid(0.0, horizon, mesh).points[1:]
    cov = kernel.matrix(t)
    return t, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# estimators


def pickands_estimate(
    alpha: float,
    lam: float = 20.0,
    mesh: float = 0.02,
    n_reps: int = 20_000,
    seed: int = 0,
    extrapolated: bool = False,
    levels: int = 3,
    tilted: bool = True,
    threads: Optional[int] = None,
) -> ConstantEstimate:
    """Estimate H_{B^alpha} = lim lambda^{-1} E sup_[0, lambda] exp(sqrt2 B(t) - t^alpha).

    With ``extrapolated`` the windows [0, lambda] and [0, 2 lambda] are read
    off the same paths and combined as (2 lambda H_2 - lambda H_1) / lambda,
    which cancels the O(1/lambda) boundary term.
    """
    if lam < 1:
        raise UsageError("lambda must be >= 1")
    if not 0 < mesh <= 0.1:
        raise UsageError("mesh must lie in (0, 0.1]")
    _check_divides(lam, mesh, "lambda")
    windows = (lam, 2.0 * lam) if extrapolated else (lam,)
    t, cov = _positive_lattice(fbm_kernel(alpha), windows[-1], mesh)
    var = t[:, 0] ** alpha
    table, L = _window_table(t, cov, var, var, windows, mesh, levels, n_reps, seed, _stream("pickands"), tilted, threads)
    return _combine(
        table,
        windows,
        1.0,
        mesh,
        (alpha / 2.0, alpha),
        kind="pickands",
        alpha=alpha,
        method="tilted" if tilted else "direct",
    )


def required_horizon(alpha: float, b: float, tol: float = TRUNCATION_TOL) -> float:
    """Horizon S beyond which the sup-exponential contributes less than ``tol``.

    Beyond S the integrand is exp(sqrt2 Y(t) - (1+b) t^alpha), whose excess
    over the value 1 at the origin is of order ((1+b)/b) exp(-b S^alpha).
    """
    if b <= 0:
        raise UsageError("Piterbarg drift b must be positive")
    need = (math.log(1.0 / tol) + math.log((1.0 + b) / b)) / b
    return need ** (1.0 / alpha)


def generalized_piterbarg_estimate(
    y_kernel: CovarianceKernel,
    alpha: float,
    b: float,
    horizon: float = 8.0,
    mesh: float = 0.02,
    n_reps: int = 20_000,
    seed: int = 0,
    levels: int = 3,
    threads: Optional[int] = None,
    kind: str = "generalized_piterbarg",
) -> ConstantEstimate:
    """Estimate P_Y^b = lim E sup_[0, S] exp(sqrt2 Y(t) - (1+b) t^alpha)."""
    if b <= 0:
        raise UsageError("Piterbarg drift b must be positive")
    if y_kernel.self_similar_index is not None and abs(y_kernel.self_similar_index - alpha / 2.0) > 1e-12:
        raise UsageError(f"Y must be self-similar with index alpha/2 = {alpha / 2:g}")
    if abs(y_kernel.eval(1.0, 1.0) - 1.0) > 1e-12:
        raise UsageError("Y must satisfy Var Y(1) = 1")
    need = required_horizon(alpha, b)
    if horizon < need:
        raise UsageError(f"horizon S = {horizon:g} too short for b = {b:g}: need S >= {need:.4g}")
    if not 0 < mesh <= 0.1:
        raise UsageError("mesh must lie in (0, 0.1]")
    _check_divides(horizon, mesh, "horizon")
    t, cov = _positive_lattice(y_kernel, horizon, mesh)
    drift = (1.0 + b) * t[:, 0] ** alpha
    table, L = _window_table(
        t, cov, drift, np.diag(cov), (horizon,), mesh, levels, n_reps, seed, _stream("piterbarg"), False, threads
    )
    return _combine(
        table,
        (horizon,),
        0.0,
        mesh,
        (alpha / 2.0, alpha),
        kind=kind,
        alpha=alpha,
        b=b,
        method="direct",
        params={"y_kernel": y_kernel.name},
    )


def piterbarg_estimate(
    alpha: float,
    b: float,
    horizon: float = 8.0,
    mesh: float = 0.02,
    n_reps: int = 20_000,
    seed: int = 0,
    levels: int = 3,
    threads: Optional[int] = None,
) -> ConstantEstimate:
    """P^b_{B^alpha}: the generalized constant with Y = fBM(alpha)."""
    return generalized_piterbarg_estimate(
        fbm_kernel(alpha), alpha, b, horizon, mesh, n_reps, seed, levels, threads, kind="piterbarg"
    )


def hw_estimate(
    spec: PerfTableSpec,
    lam: float = 6.0,
    mesh: float = 0.1,
    n_reps: int = 10_000,
    seed: int = 0,
    levels: int = 3,
    extrapolate_from: Optional[Sequence[float]] = None,
    drift: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    threads: Optional[int] = None,
) -> ConstantEstimate:
    """Estimate H_W = lim lambda^{-(m-1)} E sup_{[0, lambda]^n} exp(sqrt2 W(x) - sum_{i != k*} x_i).

    Only the m-1 coordinates indexed by N_0 = N without k* carry the
    lambda^{m-1} growth; along N^c the drift exceeds the variance and the
    window value converges exponentially.  The sub-windows
    ``extrapolate_from`` therefore shrink only the N_0 coordinates; their
    normalised values, read off the same paths, are extrapolated in 1/lambda.
    By default they are lambda * HW_SUBWINDOWS snapped to the mesh (1.2 and
    2.8 at lambda = 6), dropping any below 1; pass ``()`` to disable.
    With m = 1 there is nothing to extrapolate and the full window is
    returned.  ``drift`` replaces the default drift functional (experimental:
    only the default is validated).
    """
    if spec.alpha != 1.0:
        raise UsageError("H_W is defined for alpha = 1")
    if spec.n > HW_MAX_N:
        raise UsageError(f"H_W estimation is limited to n <= {HW_MAX_N} (cost guard)")
    if lam < 1:
        raise UsageError("lambda must be >= 1")
    _check_divides(lam, mesh, "lambda")
    if extrapolate_from is None:
        snapped = (round(round(f * lam / mesh) * mesh, 12) for f in HW_SUBWINDOWS)
        extrapolate_from = tuple(w for w in snapped if 1.0 <= w < lam)
    subs = () if spec.m == 1 or not extrapolate_from else extrapolate_from
    windows = tuple(sorted(set(float(w) for w in subs) | {float(lam)}))
    if windows[-1] != lam or windows[0] < 1:
        raise UsageError("extrapolation windows must lie in [1, lambda]")
    for w in windows:
        _check_divides(w, mesh, "window")
    k = int(round(lam / mesh)) + 1
    if k**spec.n > HW_MAX_POINTS:
        raise UsageError(f"grid [0, {lam:g}]^{spec.n} at mesh {mesh:g} has {k ** spec.n} points > {HW_MAX_POINTS}")
    X = hyperrectangle_grid([(0.0, lam)] * spec.n, mesh).points[1:]  # the origin has W = 0
    cov = w_covariance(spec, X)
    cov = 0.5 * (cov + cov.T)
    d = w_drift(spec, X) if drift is None else np.asarray(drift(X), dtype=float)
    n0_cols = [c for c, i in enumerate(spec.x_labels) if i in spec.N]
    table, L = _window_table(
        X, cov, d, np.diag(cov), windows, mesh, levels, n_reps, seed, _stream("h_w"), True, threads, n0_cols
    )
    return _combine(
        table,
        windows,
        float(spec.m - 1),
        mesh,
        (0.5, 1.0),
        kind="h_w",
        alpha=1.0,
        method="tilted",
        params={"n": spec.n, "a": list(spec.a), "m": spec.m, "custom_drift": drift is not None},
    )


def lambda_extrapolate(estimates: Sequence[ConstantEstimate]) -> ConstantEstimate:
    """Extrapolate independent window estimates to lambda = infinity.

    Pickands-type kinds: the polynomial in 1/lambda through all points,
    evaluated at 0 (for two points the slope (l2 H2 - l1 H1) / (l2 - l1)).
    Piterbarg-type kinds: the largest-horizon estimate.
    """
    ests = list(estimates)
    if len(ests) < 2:
        raise UsageError("lambda extrapolation needs at least two estimates")
    kinds = {e.kind for e in ests}
    if len(kinds) != 1:
        raise UsageError(f"cannot mix constant kinds {sorted(kinds)}")
    if len({e.mesh for e in ests}) != 1:
        raise UsageError("all estimates must share the mesh")
    lams = np.array([e.lam for e in ests], dtype=float)
    if np.any(np.diff(lams) <= 0):
        raise UsageError("estimates must be ordered by strictly increasing lambda")
    if ests[0].kind in ("piterbarg", "generalized_piterbarg"):
        return replace(ests[-1], extrapolated=True)
    w = lagrange_weights_at_zero(lams)
    value = float(np.dot(w, [e.value for e in ests]))
    stderr = float(math.sqrt(sum((wi * e.stderr) ** 2 for wi, e in zip(w, ests))))
    raw = float(np.dot(w, [e.raw_value if e.raw_value is not None else e.value for e in ests]))
    return replace(
        ests[-1],
        value=value,
        stderr=stderr,
        raw_value=raw,
        extrapolated=True,
        n_reps=sum(e.n_reps for e in ests),
        truncation_sensitivity=max(e.truncation_sensitivity for e in ests),
        params={**ests[-1].params, "lambdas": lams.tolist(), "lambda_weights": w.tolist()},
    )
