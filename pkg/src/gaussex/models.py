"""The performance-table field Z^alpha and the chi-process field.

Performance table: Z(t) = sum_i a_i (B_i(t_i) - B_i(t_{i-1})) on the ordered
simplex with t_0 = 0, t_{n+1} = 1 and independent fBMs B_i.  At alpha = 1 the
local structure near the optimizer set is described by the field W on
[0, inf)^n built from the s-map below.

Chi process: chi(t) = sqrt(sum_i X_i(t)^2) for i.i.d. centered X with standard
deviation 1/(1 + b t^alpha) and correlation 1 - a Var(Y(t) - Y(s)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    CovarianceKernel,
    build_covariance_matrix,
    cholesky_factor,
    map_blocks,
    y_kernel as make_y_kernel,
)
from .errors import DomainError, ModelError, UsageError
from .grids import GridSpec, simplex_grid

_SIMPLEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# performance table


@dataclass(frozen=True)
class PerfTableSpec:
    """Weights a_1..a_{n+1} and fBM index alpha; weights are rescaled so max a_i = 1."""

    n: int
    alpha: float
    a: tuple

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if len(a) != self.n + 1:
            raise DomainError(f"need n+1 = {self.n + 1} weights, got {len(a)}")
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise DomainError("weights a_i must be positive and finite")
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        a = a / a.max()
        a[np.isclose(a, 1.0, rtol=0, atol=1e-12)] = 1.0
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "a", tuple(float(v) for v in a))

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def N(self) -> tuple:
        """1-based indices with a_i = 1."""
        return tuple(i + 1 for i, v in enumerate(self.a) if v == 1.0)

    @property
    def Nc(self) -> tuple:
        return tuple(i + 1 for i, v in enumerate(self.a) if v < 1.0)

    @property
    def m(self) -> int:
        return len(self.N)

    @property
    def k_star(self) -> int:
        return max(self.N)

    @property
    def x_labels(self) -> tuple:
        """Labels of the W / transformed coordinates: 1..n+1 without k*."""
        return tuple(i for i in range(1, self.n + 2) if i != self.k_star)


def _augment(T: np.ndarray) -> np.ndarray:
    """Prepend t_0 = 0 and append t_{n+1} = 1."""
    P = T.shape[0]
    return np.hstack([np.zeros((P, 1)), T, np.ones((P, 1))])


def in_simplex(T, tol: float = _SIMPLEX_TOL) -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    return np.all(np.diff(_augment(T), axis=1) >= -tol, axis=1)


def _simplex_points(spec: PerfTableSpec, T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T.reshape(-1, spec.n)
    if T.shape[1] != spec.n:
        raise DomainError(f"simplex points must have {spec.n} coordinates")
    if not np.all(in_simplex(T)):
        raise DomainError("points must satisfy 0 <= t_1 <= ... <= t_n <= 1")
    return T


def _pow(x, alpha):
    return np.abs(x) ** alpha


def increment_cov(alpha, s0, s1, t0, t1):
    """Cov(B(s1) - B(s0), B(t1) - B(t0)) for fBM with index alpha (broadcasting)."""
    return 0.5 * (_pow(s1 - t0, alpha) + _pow(s0 - t1, alpha) - _pow(s1 - t1, alpha) - _pow(s0 - t0, alpha))


def perf_cov_matrix(spec: PerfTableSpec, S, T=None) -> np.ndarray:
    S = _simplex_points(spec, S)
    T = S if T is None else _simplex_points(spec, T)
    Sa, Ta = _augment(S), _augment(T)
    out = np.zeros((len(S), len(T)))
    for i in range(1, spec.n + 2):
        w = spec.a[i - 1] ** 2
        out += w * increment_cov(
            spec.alpha, Sa[:, i - 1][:, None], Sa[:, i][:, None], Ta[:, i - 1][None, :], Ta[:, i][None, :]
        )
    return out


def perf_cov(spec: PerfTableSpec, s, t) -> float:
    return float(perf_cov_matrix(spec, np.atleast_1d(s)[None, :], np.atleast_1d(t)[None, :])[0, 0])


def perf_variance(spec: PerfTableSpec, T) -> np.ndarray:
    D = np.diff(_augment(_simplex_points(spec, T)), axis=1)
    return (spec.weights**2 * _pow(D, spec.alpha)).sum(axis=1)


def perf_kernel(spec: PerfTableSpec) -> CovarianceKernel:
    return CovarianceKernel(
        f"perf_table(n={spec.n}, alpha={spec.alpha:g})",
        spec.n,
        lambda X, Y: perf_cov_matrix(spec, X, Y),
        None,
        {"family": "perf_table", "n": spec.n, "alpha": spec.alpha, "a": list(spec.a)},
    )


@dataclass(frozen=True)
class OptimizerReport:
    kind: str
    points: np.ndarray
    sigma_star: float
    m: int
    manifold_dim: int
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "points": np.asarray(self.points).tolist(),
            "sigma_star": self.sigma_star,
            "m": self.m,
            "manifold_dim": self.manifold_dim,
            "description": self.description,
        }

    def distance(self, X) -> np.ndarray:
        """Euclidean distance from each row of X to the (materialised) optimizer set."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        P = np.atleast_2d(self.points)
        d2 = ((X[:, None, :] - P[None, :, :]) ** 2).sum(-1)
        return np.sqrt(d2.min(axis=1))


def unique_optimizer(spec: PerfTableSpec):
    """Closed-form argmax z_0 and sigma_* for alpha < 1."""
    w = spec.weights ** (2.0 / (1.0 - spec.alpha))
    S = w.sum()
    z = np.cumsum(w)[:-1] / S
    return z, S ** ((1.0 - spec.alpha) / 2.0)


def corner_points(spec: PerfTableSpec) -> np.ndarray:
    """z^(j) = (0,..,0,1,..,1) with the first 1 at position j; z^(n+1) = 0."""
    pts = []
    for j in spec.N:
        z = np.zeros(spec.n)
        z[j - 1 :] = 1.0
        pts.append(z)
    return np.array(pts)


def optimal_set_mesh(spec: PerfTableSpec, mesh: float = 0.05) -> np.ndarray:
    """Lattice points of M = {t in S_n : t_j = t_{j-1} for all j in N^c} (alpha = 1)."""
    k = spec.m - 1
    labels = spec.x_labels
    n0 = [i for i in spec.N if i != spec.k_star]
    if k == 0:
        X = np.zeros((1, spec.n))
    else:
        tilde = simplex_grid(k, mesh).points
        X = np.zeros((len(tilde), spec.n))
        for c, i in enumerate(n0):
            X[:, labels.index(i)] = tilde[:, c]
    return alpha1_transform(spec, X)


def perf_optimizer(spec: PerfTableSpec, mesh: float = 0.05) -> OptimizerReport:
    if spec.alpha < 1.0:
        z, sig = unique_optimizer(spec)
        return OptimizerReport("unique_point", z[None, :], float(sig), spec.m, 0, "closed-form z_0")
    if spec.alpha == 1.0:
        desc = "sigma = 1 on S_n" if spec.m == spec.n + 1 else "M = {t : sum_{j in N} |t_j - t_{j-1}| = 1}"
        return OptimizerReport("positive_measure_set", optimal_set_mesh(spec, mesh), 1.0, spec.m, spec.m - 1, desc)
    return OptimizerReport("finite_point_set", corner_points(spec), 1.0, spec.m, 0, "corners z^(j), j in N")


# ---------------------------------------------------------------------------
# alpha = 1: coordinate transform, s-map, and the limiting field W


def _prev_in_N(spec: PerfTableSpec, i: int) -> int:
    prev = [k for k in spec.N if k < i]
    return max(prev) if prev else 1


def _full_x(spec: PerfTableSpec, X) -> np.ndarray:
    """Columns 0..n+2 indexed by label; column k* and the padding stay 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, spec.n)
    if X.shape[1] != spec.n:
        raise DomainError(f"expected {spec.n} transformed coordinates")
    full = np.zeros((X.shape[0], spec.n + 3))
    for c, i in enumerate(spec.x_labels):
        full[:, i] = X[:, c]
    return full


def alpha1_transform(spec: PerfTableSpec, X) -> np.ndarray:
    """Map x = (x_i)_{i != k*} to the simplex point t(x)."""
    xf = _full_x(spec, X)
    if np.any(xf < -_SIMPLEX_TOL):
        raise DomainError("transformed coordinates must be nonnegative")
    n, ks = spec.n, spec.k_star
    T = np.zeros((xf.shape[0], n))
    for i in range(1, n + 1):
        if i >= ks:
            T[:, i - 1] = 1.0 - xf[:, i + 1 : n + 2].sum(axis=1)
        elif i in spec.N:
            T[:, i - 1] = xf[:, i]
        else:
            T[:, i - 1] = xf[:, _prev_in_N(spec, i) : i + 1].sum(axis=1)
    if not np.all(in_simplex(T, 1e-12)):
        raise DomainError("x lies outside the transformed simplex")
    return T


def alpha1_inverse(spec: PerfTableSpec, T) -> np.ndarray:
    """x_i = t_i for i in N_0 and x_i = t_i - t_{i-1} for i in N^c."""
    T = _simplex_points(spec, T)
    Ta = _augment(T)
    cols = []
    for i in spec.x_labels:
        cols.append(Ta[:, i] if i in spec.N else Ta[:, i] - Ta[:, i - 1])
    return np.column_stack(cols)


def s_map(spec: PerfTableSpec, X) -> np.ndarray:
    """Return s_0(x), ..., s_{n+1}(x) as a (P, n+2) array."""
    xf = _full_x(spec, X)
    n, ks = spec.n, spec.k_star
    S = np.zeros((xf.shape[0], n + 2))
    for i in range(1, n + 2):
        if i >= ks:
            S[:, i] = xf[:, i + 1 : n + 2].sum(axis=1)
        elif i in spec.N:
            S[:, i] = xf[:, i]
        else:
            S[:, i] = xf[:, _prev_in_N(spec, i) : i + 1].sum(axis=1)
    return S


def w_covariance(spec: PerfTableSpec, X, Y=None) -> np.ndarray:
    """Cov(W(x), W(y)) from the Brownian representation of W."""
    Sx = s_map(spec, X)
    Sy = Sx if Y is None else s_map(spec, Y)
    out = np.zeros((len(Sx), len(Sy)))
    for i in range(1, spec.n + 2):
        if i in spec.N:
            out += 0.5 * (np.minimum(Sx[:, i][:, None], Sy[:, i][None, :]))
            out += 0.5 * (np.minimum(Sx[:, i - 1][:, None], Sy[:, i - 1][None, :]))
        else:
            lo_x, hi_x = np.minimum(Sx[:, i - 1], Sx[:, i]), np.maximum(Sx[:, i - 1], Sx[:, i])
            lo_y, hi_y = np.minimum(Sy[:, i - 1], Sy[:, i]), np.maximum(Sy[:, i - 1], Sy[:, i])
            overlap = np.minimum(hi_x[:, None], hi_y[None, :]) - np.maximum(lo_x[:, None], lo_y[None, :])
            out += 0.5 * spec.a[i - 1] ** 2 * np.clip(overlap, 0.0, None)
    return out


def w_drift(spec: PerfTableSpec, X) -> np.ndarray:
    """sum_{i != k*} x_i."""
    X = np.asarray(X, dtype=float).reshape(-1, spec.n)
    return X.sum(axis=1)


def w_kernel(spec: PerfTableSpec) -> CovarianceKernel:
    return CovarianceKernel(
        f"W(n={spec.n})", spec.n, lambda X, Y: w_covariance(spec, X, Y), 0.5, {"family": "W", "a": list(spec.a)}
    )


def w_increment_var(spec: PerfTableSpec, x, y) -> float:
    """E(W(x) - W(y))^2 from the representation (requires alpha = 1)."""
    if spec.alpha != 1.0:
        raise UsageError("W is the alpha = 1 limiting field")
    x = np.asarray(x, dtype=float).reshape(1, spec.n)
    y = np.asarray(y, dtype=float).reshape(1, spec.n)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("W is indexed by x >= 0")
    sx, sy = s_map(spec, x)[0], s_map(spec, y)[0]
    total = 0.0
    for i in range(1, spec.n + 2):
        if i in spec.N:
            total += 0.5 * (abs(sx[i] - sy[i]) + abs(sx[i - 1] - sy[i - 1]))
        else:
            lx, hx = sorted((sx[i - 1], sx[i]))
            ly, hy = sorted((sy[i - 1], sy[i]))
            overlap = max(0.0, min(hx, hy) - max(lx, ly))
            total += 0.5 * spec.a[i - 1] ** 2 * ((hx - lx) + (hy - ly) - 2.0 * overlap)
    return total


def yrr_min_form(spec: PerfTableSpec, x, y) -> float:
    """Min-form of the W increment variance written in t(x) coordinates."""
    xf = _full_x(spec, x)[0]
    yf = _full_x(spec, y)[0]
    n, ks = spec.n, spec.k_star
    tx = np.concatenate([[0.0], _t_unchecked(spec, xf), [1.0]])
    ty = np.concatenate([[0.0], _t_unchecked(spec, yf), [1.0]])
    total = 0.0
    for i in spec.N:
        if i != ks:
            total += 0.5 * (abs(xf[i] - yf[i]) + abs(tx[i - 1] - ty[i - 1]))
    total += 0.5 * abs(tx[ks - 1] - ty[ks - 1])
    total += 0.5 * abs((xf[ks + 1 : n + 2] - yf[ks + 1 : n + 2]).sum())
    for i in spec.Nc:
        a2 = spec.a[i - 1] ** 2
        if i < ks:
            lhs = abs(tx[i - 1] - ty[i - 1]) + abs(tx[i] - ty[i])
        else:
            lhs = abs((xf[i : n + 2] - yf[i : n + 2]).sum()) + abs((xf[i + 1 : n + 2] - yf[i + 1 : n + 2]).sum())
        total += 0.5 * a2 * min(lhs, xf[i] + yf[i])
    return total


def _t_unchecked(spec, xf):
    """t(x) without the simplex-membership check (x may leave the unit box)."""
    n, ks = spec.n, spec.k_star
    t = np.zeros(n)
    for i in range(1, n + 1):
        if i >= ks:
            t[i - 1] = 1.0 - xf[i + 1 : n + 2].sum()
        elif i in spec.N:
            t[i - 1] = xf[i]
        else:
            t[i - 1] = xf[_prev_in_N(spec, i) : i + 1].sum()
    return t


# ---------------------------------------------------------------------------
# local expansions around the optimizer set

EXPANSIONS_BY_REGIME = {"lt1": ("var1", "r1"), "eq1": ("sigma21", "r2"), "gt1": ("var3",)}


def _regime(alpha: float) -> str:
    return "lt1" if alpha < 1.0 else ("eq1" if alpha == 1.0 else "gt1")


def _sample_ball(rng, center, delta, count, n):
    """Uniform points in the Euclidean delta-ball around center intersected with S_n."""
    out = []
    need = count
    for _ in range(10_000):
        k = max(4 * need, 64)
        g = rng.standard_normal((k, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = delta * rng.random(k) ** (1.0 / n)
        cand = center + g * r[:, None]
        cand = cand[in_simplex(cand, 0.0)]
        out.append(cand[:need])
        need -= len(out[-1])
        if need <= 0:
            return np.vstack(out)
    raise ModelError("could not place probes inside the simplex")


def _rel_err(expansion, exact, floor=1e-14):
    expansion = np.asarray(expansion, dtype=float)
    exact = np.asarray(exact, dtype=float)
    both_zero = (np.abs(exact) <= floor) & (np.abs(expansion) <= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(expansion / exact - 1.0)
    err = np.where(both_zero, 0.0, err)
    return np.where(np.isnan(err), np.inf, err)


def _one_minus_r(spec, S, T):
    """1 - corr(Z(s_k), Z(t_k)) for paired rows."""
    Sa, Ta = _augment(S), _augment(T)
    cov = np.zeros(len(S))
    for i in range(1, spec.n + 2):
        cov += spec.a[i - 1] ** 2 * increment_cov(spec.alpha, Sa[:, i - 1], Sa[:, i], Ta[:, i - 1], Ta[:, i])
    sig = np.sqrt(perf_variance(spec, S) * perf_variance(spec, T))
    return 1.0 - cov / sig


def check_expansions(
    spec: PerfTableSpec,
    delta: float,
    probe_count: int = 200,
    expansions: Optional[Iterable[str]] = None,
    seed: int = 0,
) -> dict:
    """Max relative error |expansion / exact - 1| over random probes near the optimizer set."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    if probe_count < 1:
        raise UsageError("probe_count must be >= 1")
    regime = _regime(spec.alpha)
    available = EXPANSIONS_BY_REGIME[regime]
    names = tuple(available if expansions is None else expansions)
    for name in names:
        if name not in available:
            raise UsageError(f"expansion '{name}' does not apply for alpha = {spec.alpha:g} (available: {', '.join(available)})")
    rng = np.random.default_rng(seed)
    n, al, a = spec.n, spec.alpha, spec.weights
    out = {}

    if regime == "lt1":
        z, sig = unique_optimizer(spec)
        S_w = (a ** (2.0 / (1.0 - al))).sum()
        za = np.concatenate([[0.0], z, [1.0]])
        if "var1" in names:
            T = _sample_ball(rng, z, delta, probe_count, n)
            exact = 1.0 - np.sqrt(perf_variance(spec, T)) / sig
            d = np.diff(_augment(T) - za, axis=1)
            approx = al * (1 - al) * S_w / 4.0 * (a ** (2.0 / (al - 1.0)) * d**2).sum(axis=1)
            out["var1"] = float(_rel_err(approx, exact).max())
        if "r1" in names:
            Sp = _sample_ball(rng, z, delta, probe_count, n)
            Tp = _sample_ball(rng, z, delta, probe_count, n)
            exact = _one_minus_r(spec, Sp, Tp)
            coef = a[:-1] ** 2 + a[1:] ** 2
            approx = (coef * np.abs(Sp - Tp) ** al).sum(axis=1) / (2.0 * sig**2)
            out["r1"] = float(_rel_err(approx, exact).max())

    elif regime == "eq1":
        anchors = _random_m_points(spec, rng, probe_count)
        nc = np.array(spec.Nc, dtype=int)
        if "sigma21" in names:
            T = np.vstack([_sample_ball(rng, z, delta, 1, n) for z in anchors])
            exact = 1.0 - np.sqrt(perf_variance(spec, T))
            D = np.diff(_augment(T), axis=1)
            approx = 0.5 * ((1.0 - a[nc - 1] ** 2) * np.abs(D[:, nc - 1])).sum(axis=1) if len(nc) else np.zeros(len(T))
            out["sigma21"] = float(_rel_err(approx, exact, 1e-13).max())
        if "r2" in names:
            Sp = np.vstack([_sample_ball(rng, z, delta, 1, n) for z in anchors])
            Tp = np.vstack([_sample_ball(rng, z, delta, 1, n) for z in anchors])
            exact = _one_minus_r(spec, Sp, Tp)
            Sa, Ta = _augment(Sp), _augment(Tp)
            ends = np.abs(Ta[:, :-1] - Sa[:, :-1]) + np.abs(Ta[:, 1:] - Sa[:, 1:])
            lens = np.abs(np.diff(Ta, axis=1)) + np.abs(np.diff(Sa, axis=1))
            approx = 0.5 * (a**2 * np.minimum(ends, lens)).sum(axis=1)
            out["r2"] = float(_rel_err(approx, exact).max())

    else:
        if "var3" in names:
            worst = 0.0
            for j, z in zip(spec.N, corner_points(spec)):
                T = _sample_ball(rng, z, delta, probe_count, n)
                T = T[np.linalg.norm(T - z, axis=1) > 0]
                exact = 1.0 - np.sqrt(perf_variance(spec, T))
                D = np.diff(_augment(T), axis=1)
                others = np.delete(np.arange(n + 1), j - 1)
                approx = 0.5 * (al * np.abs(D[:, j - 1] - 1.0) - (a[others] ** 2 * np.abs(D[:, others]) ** al).sum(axis=1))
                worst = max(worst, float(_rel_err(approx, exact).max()))
            out["var3"] = worst
    return out


def _random_m_points(spec: PerfTableSpec, rng, count: int) -> np.ndarray:
    """Uniform random points of the optimizer set M (alpha = 1)."""
    labels = spec.x_labels
    X = np.zeros((count, spec.n))
    n0 = [i for i in spec.N if i != spec.k_star]
    if n0:
        tilde = np.sort(rng.random((count, len(n0))), axis=1)
        for c, i in enumerate(n0):
            X[:, labels.index(i)] = tilde[:, c]
    return alpha1_transform(spec, X)


# ---------------------------------------------------------------------------
# chi process


def spherical_map(theta) -> np.ndarray:
    """Unit vector v(theta) of length len(theta) + 1 in hyperspherical coordinates."""
    th = np.asarray(theta, dtype=float)
    single = th.ndim == 1
    th = np.atleast_2d(th)
    k = th.shape[1]
    if k >= 1:
        if np.any(th[:, : k - 1] < 0) or np.any(th[:, : k - 1] > math.pi):
            raise DomainError("leading angles must lie in [0, pi]")
        if np.any(th[:, k - 1] < 0) or np.any(th[:, k - 1] >= 2 * math.pi):
            raise DomainError("last angle must lie in [0, 2pi)")
    v = np.ones((th.shape[0], k + 1))
    sin_prod = np.ones(th.shape[0])
    for i in range(k):
        v[:, i] = sin_prod * np.cos(th[:, i])
        sin_prod = sin_prod * np.sin(th[:, i])
    v[:, k] = sin_prod
    return v[0] if single else v


@dataclass(frozen=True)
class ChiSpec:
    n: int
    alpha: float
    a: float
    b: float
    y_family: str = "fbm"
    gamma: Optional[float] = None
    c_Y: float = 1.0
    y_kernel: CovarianceKernel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.a <= 0 or self.b <= 0 or self.c_Y <= 0:
            raise DomainError("a, b and c_Y must be positive")
        gamma = self.alpha if self.gamma is None else float(self.gamma)
        if not self.alpha <= gamma <= 2.0:
            raise DomainError(f"gamma must lie in [alpha, 2], got {gamma}")
        kern = make_y_kernel(self.y_family, self.alpha)
        if abs(kern.eval(1.0, 1.0) - 1.0) > 1e-12:
            raise ModelError("Y kernel must satisfy Var Y(1) = 1")
        # r = 1 - a Var(Y(t) - Y(s)) must stay inside [-1, 1] on [0, 1]^2
        worst = self.a * max_increment_var(kern)
        if worst > 2.0 + 1e-12:
            raise ModelError(
                f"a * max Var(Y(t) - Y(s)) = {worst:.6g} > 2: exact correlation model leaves [-1, 1]"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "y_kernel", kern)

    @property
    def drift(self) -> float:
        """Piterbarg drift parameter b / a."""
        return self.b / self.a


def max_increment_var(kernel: CovarianceKernel, points: int = 201) -> float:
    t = np.linspace(0.0, 1.0, points)
    K = kernel.matrix(t[:, None])
    d = np.diag(K)
    return float((d[:, None] + d[None, :] - 2.0 * K).max())


def chi_sigma(spec: ChiSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return 1.0 / (1.0 + spec.b * t**spec.alpha)


def chi_x_cov(spec: ChiSpec, s, t) -> np.ndarray:
    """Covariance matrix of one X component between time vectors s and t."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(s < 0) or np.any(s > 1) or np.any(t < 0) or np.any(t > 1):
        raise DomainError("chi time points must lie in [0, 1]")
    K = spec.y_kernel.matrix(s[:, None], t[:, None])
    vs = spec.y_kernel.variance(s[:, None])
    vt = spec.y_kernel.variance(t[:, None])
    r = 1.0 - spec.a * (vs[:, None] + vt[None, :] - 2.0 * K)
    if np.any(r < -1.0 - 1e-12) or np.any(r > 1.0 + 1e-12):
        raise ModelError("correlation left [-1, 1]")
    return chi_sigma(spec, s)[:, None] * chi_sigma(spec, t)[None, :] * r


def chi_cov(spec: ChiSpec, p, q) -> float:
    """Cov(Z(theta, t), Z(theta', t')) with p = (theta..., t) and q likewise."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if len(p) != spec.n or len(q) != spec.n:
        raise DomainError(f"chi field points are (theta_1..theta_{spec.n - 1}, t)")
    vp, vq = spherical_map(p[:-1]), spherical_map(q[:-1])
    return float(chi_x_cov(spec, p[-1], q[-1])[0, 0] * np.dot(vp, vq))


def chi_kernel(spec: ChiSpec) -> CovarianceKernel:
    def func(X, Y):
        V, U = spherical_map(X[:, :-1]), spherical_map(Y[:, :-1])
        return chi_x_cov(spec, X[:, -1], Y[:, -1]) * (V @ U.T)

    return CovarianceKernel(f"chi_field(n={spec.n})", spec.n, func, None, {"family": "chi"})


def _time_factor(spec: ChiSpec, time_grid: GridSpec):
    if time_grid.dim != 1:
        raise UsageError("chi sampling needs a one-dimensional time grid")
    t = time_grid.points[:, 0]
    if t.min() < 0 or t.max() > 1:
        raise DomainError("chi time grid must lie in [0, 1]")
    C = chi_x_cov(spec, t, t)
    return cholesky_factor(0.5 * (C + C.T))


def chi_sup_sample(spec: ChiSpec, time_grid: GridSpec, n_reps: int, seed: int, threads=None) -> np.ndarray:
    """Grid suprema of chi(t) = |X(t)| for n i.i.d. components."""
    chol = _time_factor(spec, time_grid)

    def fn(vals, rng):
        vals = vals.reshape(vals.shape[0], spec.n, -1)
        return np.sqrt((vals**2).sum(axis=1)).max(axis=1)

    return np.concatenate(map_blocks(chol.factor, n_reps, seed, fn, copies=spec.n, threads=threads))


def chi_field_sup_pair(
    spec: ChiSpec, time_grid: GridSpec, angle_mesh: float, n_reps: int, seed: int
) -> tuple:
    """Shared-sample (sup chi, sup over sphere x time of Z) for the chitrans check."""
    if spec.n < 2:
        raise UsageError("the spherical representation needs n >= 2")
    chol = _time_factor(spec, time_grid)
    k = spec.n - 1
    axes = [np.arange(0.0, math.pi + 1e-12, angle_mesh) for _ in range(k - 1)]
    last = np.arange(0.0, 2 * math.pi, angle_mesh)
    axes.append(last[last < 2 * math.pi])
    theta = np.array(np.meshgrid(*axes, indexing="ij")).reshape(k, -1).T
    V = spherical_map(theta)

    def fn(vals, rng):
        vals = vals.reshape(vals.shape[0], spec.n, -1)
        chi = np.sqrt((vals**2).sum(axis=1)).max(axis=1)
        z = np.einsum("an,rnt->rat", V, vals).max(axis=(1, 2))
        return np.stack([chi, z], axis=1)

    both = np.vstack(map_blocks(chol.factor, n_reps, seed, fn, copies=spec.n))
    return both[:, 0], both[:, 1]
