"""Supremum-tail Monte Carlo and empirical-versus-asymptotic ratio tables."""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import norm

from . import __version__
from .asymptotics import AsymptoticFormula
from .constants import ConstantEstimate
from .core import CovarianceKernel, build_covariance_matrix, cholesky_factor, map_blocks
from .errors import UsageError
from .grids import GridSpec
from .models import ChiSpec, OptimizerReport, PerfTableSpec, chi_sup_sample, perf_kernel, perf_optimizer

Z95 = float(norm.ppf(0.975))
RESOLVABLE_HITS = 10
RATIO_WINDOW = (0.2, 5.0)


@dataclass(frozen=True)
class FieldModel:
    """A Gaussian (or chi) field together with what the harness needs to know about it.

    ``sampler(grid, n_reps, seed, threads)`` returns grid suprema; the default
    factors the kernel's covariance on the grid and takes row maxima.
    """

    name: str
    kernel: Optional[CovarianceKernel]
    optimizer: Optional[OptimizerReport] = None
    beta: float = 2.0
    metadata: dict = field(default_factory=dict)
    sampler: Optional[Callable] = field(default=None, repr=False, compare=False)

    def sample_sups(self, grid: GridSpec, n_reps: int, seed: int, threads: Optional[int] = None) -> np.ndarray:
        if self.sampler is not None:
            return self.sampler(grid, n_reps, seed, threads)
        chol = cholesky_factor(build_covariance_matrix(self.kernel, grid))
        return np.concatenate(map_blocks(chol.factor, n_reps, seed, lambda v, rng: v.max(axis=1), threads=threads))


def perf_table_model(spec: PerfTableSpec) -> FieldModel:
    opt = perf_optimizer(spec)
    # decay exponent of 1 - sigma near the optimizer: quadratic for alpha < 1, linear otherwise
    beta = 2.0 if spec.alpha < 1.0 else 1.0
    return FieldModel(
        f"perf_table(n={spec.n}, alpha={spec.alpha:g}, a={list(spec.a)})",
        perf_kernel(spec),
        opt,
        beta,
        {"kind": "perf_table", "n": spec.n, "alpha": spec.alpha, "a": list(spec.a), "m": spec.m},
    )


def chi_model(spec: ChiSpec) -> FieldModel:
    opt = OptimizerReport("unique_point", np.zeros((1, 1)), 1.0, 1, 0, "sigma_X is maximal at t = 0")

    def sampler(grid, n_reps, seed, threads):
        return chi_sup_sample(spec, grid, n_reps, seed, threads)

    return FieldModel(
        f"chi(n={spec.n}, alpha={spec.alpha:g}, a={spec.a:g}, b={spec.b:g}, Y={spec.y_family})",
        None,
        opt,
        spec.alpha,
        {"kind": "chi", "n": spec.n, "alpha": spec.alpha, "a": spec.a, "b": spec.b, "y_family": spec.y_family},
        sampler,
    )


def kernel_model(kernel: CovarianceKernel, optimizer: Optional[OptimizerReport] = None, beta: float = 2.0) -> FieldModel:
    return FieldModel(kernel.name, kernel, optimizer, beta, {"kind": "kernel", **kernel.params})


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise UsageError("Wilson interval needs n >= 1")
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # clamp so round-off never puts p outside its own interval
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


@dataclass(frozen=True)
class TailEstimate:
    u: float
    p_hat: float
    ci_lo: float
    ci_hi: float
    n_reps: int
    exceedances: int
    grid: dict
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_coverage(model: FieldModel, grid: GridSpec):
    """At least one grid point must lie within 2 x mesh of the optimizer set."""
    opt = model.optimizer
    if opt is None:
        return
    pts = np.atleast_2d(opt.points)
    if pts.shape[1] != grid.dim:
        raise UsageError(f"grid dimension {grid.dim} does not match the model ({pts.shape[1]})")
    d = opt.distance(grid.points).min() if len(pts) <= len(grid) else _min_dist(pts, grid.points)
    if d > 2.0 * grid.mesh + 1e-12:
        raise UsageError(
            f"grid misses the optimizer set: nearest grid point at distance {d:.4g} > 2 x mesh = {2 * grid.mesh:.4g}"
        )


def _min_dist(A, B):
    best = np.inf
    for start in range(0, len(A), 512):
        d2 = ((A[start : start + 512, None, :] - B[None, :, :]) ** 2).sum(-1)
        best = min(best, float(np.sqrt(d2.min())))
    return best


def tail_from_sups(sups: np.ndarray, u: float, grid: GridSpec, seed: int) -> TailEstimate:
    n = len(sups)
    k = int(np.count_nonzero(sups > u))
    lo, hi = wilson_interval(k, n)
    return TailEstimate(float(u), k / n, lo, hi, n, k, grid.summary(), int(seed))


def estimate_tail(
    model: FieldModel, grid: GridSpec, u: float, n_reps: int, seed: int, threads: Optional[int] = None
) -> TailEstimate:
    """Fraction of sampled grid suprema above u, with a 95% Wilson interval.

    This is unbiased for the discretised tail, which lower-bounds the
    continuous one.
    """
    check_coverage(model, grid)
    sups = model.sample_sups(grid, n_reps, seed, threads)
    return tail_from_sups(sups, u, grid, seed)


@dataclass
class ResultRecord:
    config_hash: str
    timestamp: str
    rows: list
    constants: list
    formula: dict
    model: dict
    grid: dict
    n_reps: int
    seed: int
    software_version: str = __version__
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        return cls(**d)

    def ratios(self) -> list:
        return [r["ratio"] for r in self.rows]


def max_feasible_u(formula: AsymptoticFormula, n_reps: int) -> float:
    """Largest u with predicted probability >= RESOLVABLE_HITS / n_reps (0 if none)."""
    target = math.log(RESOLVABLE_HITS / n_reps)
    f = lambda u: formula.log_evaluate(u) - target
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            return math.inf
    # C u^e Psi(u) need not be monotone near 0: scan for the last feasible point
    us = np.linspace(hi / 4000.0, hi, 4000)
    ok = np.flatnonzero(np.asarray(f(us)) >= 0)
    if len(ok) == 0:
        return 0.0
    return float(optimize.brentq(f, us[ok[-1]], us[ok[-1] + 1], xtol=1e-12))


def ratio_table(
    model: FieldModel,
    formula: AsymptoticFormula,
    u_levels: Sequence[float],
    grid: GridSpec,
    n_reps: int,
    seed: int,
    constants: Sequence[ConstantEstimate] = (),
    config_hash: str = "",
    threads: Optional[int] = None,
    timestamp: Optional[str] = None,
) -> ResultRecord:
    """Empirical tail over asymptotic prediction at each u, from one shared sample."""
    u = [float(x) for x in u_levels]
    if not u:
        raise UsageError("need at least one u level")
    if any(b <= a for a, b in zip(u, u[1:])):
        raise UsageError("u levels must be strictly increasing")
    if formula.evaluate(u[-1]) < RESOLVABLE_HITS / n_reps:
        raise UsageError(
            f"u = {u[-1]:g} is not resolvable with {n_reps} replications; "
            f"largest feasible u is {max_feasible_u(formula, n_reps):.4f}"
        )
    check_coverage(model, grid)
    sups = model.sample_sups(grid, n_reps, seed, threads)
    rows, warnings = [], []
    for level in u:
        t = tail_from_sups(sups, level, grid, seed)
        asym = float(formula.evaluate(level))
        row = {
            "u": level,
            "p_hat": t.p_hat,
            "ci_lo": t.ci_lo,
            "ci_hi": t.ci_hi,
            "exceedances": t.exceedances,
            "asymptotic": asym,
            "ratio": t.p_hat / asym,
            "ratio_lo": t.ci_lo / asym,
            "ratio_hi": t.ci_hi / asym,
        }
        row["flag"] = bool(row["ratio_hi"] < RATIO_WINDOW[0] or row["ratio_lo"] > RATIO_WINDOW[1])
        if row["flag"]:
            warnings.append(f"model mismatch at u = {level:g}: ratio CI [{row['ratio_lo']:.3g}, {row['ratio_hi']:.3g}] misses [0.2, 5]")
        rows.append(row)
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return ResultRecord(
        config_hash=config_hash,
        timestamp=ts,
        rows=rows,
        constants=[c.to_dict() for c in constants],
        formula=formula.to_dict(),
        model={"name": model.name, **model.metadata},
        grid=grid.summary(),
        n_reps=int(n_reps),
        seed=int(seed),
        warnings=warnings,
    )
