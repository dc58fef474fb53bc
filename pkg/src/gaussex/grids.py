"""Finite discretisations of the index sets used by the fields.

Every builder returns a :class:`GridSpec` whose points are unique and sorted
lexicographically.  Coordinates are rounded to 13 decimals so that lattice
points produced by different arithmetic paths compare equal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, UsageError

KINDS = ("interval", "hyperrectangle", "simplex", "sphere_time")
_DECIMALS = 13
_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    kind: str
    points: np.ndarray
    per_axis_mesh: tuple
    bounds: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown grid kind '{self.kind}'")
        pts = np.round(np.asarray(self.points, dtype=float), _DECIMALS)
        if pts.ndim == 1:
            pts = pts[:, None]
        if len(pts) == 0:
            raise DomainError("grid must contain at least one point")
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        if len(pts) > 1 and np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise DomainError("grid points must be unique")
        if self.kind == "simplex":
            ext = np.hstack([np.zeros((len(pts), 1)), pts, np.ones((len(pts), 1))])
            if np.any(np.diff(ext, axis=1) < -_TOL):
                raise DomainError("simplex grid points must satisfy 0 <= t_1 <= ... <= t_n <= 1")
        if any(m <= 0 for m in self.per_axis_mesh):
            raise DomainError("mesh sizes must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "per_axis_mesh", tuple(float(m) for m in self.per_axis_mesh))
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @property
    def mesh(self) -> float:
        return max(self.per_axis_mesh)

    def summary(self) -> dict:
        out = {
            "kind": self.kind,
            "n_points": len(self),
            "per_axis_mesh": list(self.per_axis_mesh),
            "bounds": [list(b) for b in self.bounds],
        }
        if self.meta:
            out["density_schedule"] = self.meta
        return out

    def index_of(self, points) -> np.ndarray:
        """Row indices of ``points`` (which must all be grid points)."""
        lookup = {tuple(p): i for i, p in enumerate(self.points)}
        q = np.round(np.asarray(points, dtype=float).reshape(-1, self.dim), _DECIMALS)
        try:
            return np.array([lookup[tuple(p)] for p in q], dtype=int)
        except KeyError as exc:
            raise DomainError(f"point {exc.args[0]} is not on the grid") from None


def _steps(lo, hi, mesh):
    k = math.floor((hi - lo) / mesh + 1e-9)
    return lo + mesh * np.arange(k + 1)


def interval_grid(lo: float, hi: float, mesh: float) -> GridSpec:
    if hi < lo or mesh <= 0:
        raise UsageError("interval grid needs lo <= hi and mesh > 0")
    return GridSpec("interval", _steps(lo, hi, mesh)[:, None], (mesh,), ((lo, hi),))


def points_grid(points, kind="interval", mesh=None, bounds=None, meta=None) -> GridSpec:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if bounds is None:
        bounds = tuple(zip(pts.min(0), pts.max(0)))
    if mesh is None:
        mesh = []
        for j in range(pts.shape[1]):
            gaps = np.diff(np.unique(pts[:, j]))
            mesh.append(gaps.max() if len(gaps) else 1.0)
    mesh = tuple(np.broadcast_to(np.asarray(mesh, dtype=float), (pts.shape[1],)))
    return GridSpec(kind, pts, mesh, tuple(bounds), dict(meta or {}))


def hyperrectangle_grid(bounds: Sequence[tuple], mesh) -> GridSpec:
    mesh = np.broadcast_to(np.asarray(mesh, dtype=float), (len(bounds),))
    axes = [_steps(lo, hi, h) for (lo, hi), h in zip(bounds, mesh)]
    pts = np.array(list(itertools.product(*axes)))
    return GridSpec("hyperrectangle", pts, tuple(mesh), tuple(bounds))


def simplex_grid(n: int, mesh: float) -> GridSpec:
    """Lattice points of S_n = {0 <= t_1 <= ... <= t_n <= 1} with spacing ``mesh``."""
    K = round(1.0 / mesh)
    if abs(K * mesh - 1.0) > 1e-9:
        raise UsageError(f"simplex mesh must divide 1, got {mesh}")
    pts = np.array(list(itertools.combinations_with_replacement(range(K + 1), n)), dtype=float) / K
    return GridSpec("simplex", pts, (mesh,) * n, ((0.0, 1.0),) * n)


def sphere_time_grid(n: int, angle_mesh: float, times) -> GridSpec:
    """Grid on [0,pi]^{n-2} x [0,2pi) x times for the spherical chi-field."""
    if n < 2:
        raise UsageError("sphere x time grid needs n >= 2")
    axes = [_steps(0.0, math.pi, angle_mesh) for _ in range(n - 2)]
    last = _steps(0.0, 2 * math.pi, angle_mesh)
    axes.append(last[last < 2 * math.pi - 1e-12])
    times = np.asarray(times, dtype=float).ravel()
    axes.append(times)
    pts = np.array(list(itertools.product(*axes)))
    tmesh = float(np.diff(times).max()) if len(times) > 1 else 1.0
    bounds = [(0.0, math.pi)] * (n - 2) + [(0.0, 2 * math.pi), (float(times.min()), float(times.max()))]
    return GridSpec("sphere_time", pts, (angle_mesh,) * (n - 1) + (tmesh,), tuple(bounds))


def proof_band(u: float, beta: float) -> float:
    """Localisation band width (ln u / u)^(2/beta); a heuristic default for grid refinement."""
    if u <= 1.0:
        raise UsageError("band width (ln u / u)^(2/beta) needs u > 1")
    return (math.log(u) / u) ** (2.0 / beta)


def _refined_axis(lo, hi, h0, focus, band, levels, ratio):
    pts = [_steps(lo, hi, h0)]
    sched = [{"width": hi - lo, "mesh": h0}]
    for lev in range(1, levels + 1):
        width = min(hi - lo, band * ratio ** (-(lev - 1)))
        h = h0 / ratio**lev
        a, b = max(lo, focus - width), min(hi, focus + width)
        k0 = math.ceil((a - focus) / h - 1e-9)
        k1 = math.floor((b - focus) / h + 1e-9)
        pts.append(focus + h * np.arange(k0, k1 + 1))
        sched.append({"width": width, "mesh": h})
    return np.unique(np.round(np.concatenate(pts), _DECIMALS)), sched


def refined_interval_grid(
    lo: float,
    hi: float,
    n_points: int,
    focus: float,
    band: float,
    levels: int = 4,
    ratio: float = 2.0,
) -> GridSpec:
    """Interval grid with ``levels`` geometric refinements (mesh / ratio^l) around ``focus``.

    Level ``l`` covers ``focus +- band * ratio^-(l-1)``.  The base mesh is the
    coarsest one that keeps the total at or below ``n_points``.
    """
    if n_points < 2:
        raise UsageError("refined grid needs n_points >= 2")
    count = lambda h: len(_refined_axis(lo, hi, h, focus, band, levels, ratio)[0])
    a, b = (hi - lo) / 2.0, (hi - lo) / (4.0 * n_points)
    if count(a) > n_points:
        raise UsageError(f"cannot fit {levels} refinement levels into {n_points} points")
    for _ in range(80):
        mid = math.sqrt(a * b)
        if count(mid) > n_points:
            b = mid
        else:
            a = mid
    pts, sched = _refined_axis(lo, hi, a, focus, band, levels, ratio)
    meta = {"focus": [focus], "band": band, "ratio": ratio, "levels": sched}
    return GridSpec("interval", pts[:, None], (a,), ((lo, hi),), meta)


def refined_simplex_grid(
    n: int,
    base_mesh: float,
    foci: Sequence[Sequence[float]],
    band: float,
    levels: int = 4,
    ratio: float = 2.0,
) -> GridSpec:
    """Simplex lattice plus geometric refinement boxes around each focus point."""
    base = simplex_grid(n, base_mesh)
    pts = [base.points]
    sched = [{"width": 1.0, "mesh": base_mesh}]
    for lev in range(1, levels + 1):
        width = min(1.0, band * ratio ** (-(lev - 1)))
        h = base_mesh / ratio**lev
        sched.append({"width": width, "mesh": h})
        for z in foci:
            z = np.asarray(z, dtype=float)
            axes = []
            for zi in z:
                a, b = max(0.0, zi - width), min(1.0, zi + width)
                k0 = math.ceil((a - zi) / h - 1e-9)
                k1 = math.floor((b - zi) / h + 1e-9)
                axes.append(zi + h * np.arange(k0, k1 + 1))
            box = np.array(list(itertools.product(*axes)))
            ext = np.hstack([np.zeros((len(box), 1)), box, np.ones((len(box), 1))])
            pts.append(box[np.all(np.diff(ext, axis=1) >= -_TOL, axis=1)])
    allpts = np.unique(np.round(np.vstack(pts), _DECIMALS), axis=0)
    allpts = np.clip(allpts, 0.0, 1.0)
    meta = {"focus": [list(map(float, z)) for z in foci], "band": band, "ratio": ratio, "levels": sched}
    return GridSpec("simplex", allpts, (base_mesh,) * n, ((0.0, 1.0),) * n, meta)


def refined_simplex_grid_target(n, n_points, foci, band, levels=4, ratio=2.0) -> GridSpec:
    """Finest refined simplex grid (base mesh 1/K) with at most ``n_points`` points."""
    best = None
    for K in range(2, 10_000):
        grid = refined_simplex_grid(n, 1.0 / K, foci, band, levels, ratio)
        if len(grid) > n_points:
            break
        best = grid
    if best is None:
        raise UsageError(f"no refined simplex grid fits in {n_points} points")
    return best
