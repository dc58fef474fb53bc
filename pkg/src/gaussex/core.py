"""Exact covariance kernels, Cholesky with jitter escalation, and dense Gaussian sampling.

Sampling is organised in fixed-size replication blocks.  Block ``b`` draws its
normals from a Philox stream keyed by ``(seed, *stream, b)``, so a batch is the
same whether the blocks run serially or on a thread pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, NotPositiveDefinite, UsageError
from .grids import GridSpec

BLOCK_SIZE = 2048
JITTER_SCHEDULE = (0.0, 1e-12, 1e-10, 1e-8)


def fbm_covariance(alpha, s, t):
    """Cov(B^alpha(s), B^alpha(t)) = (|s|^alpha + |t|^alpha - |t-s|^alpha) / 2.

    Works elementwise on arrays.
    """
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"fBM index alpha must lie in (0, 2], got {alpha}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fBM covariance is defined for s, t >= 0")
    out = 0.5 * (s**alpha + t**alpha - np.abs(t - s) ** alpha)
    return float(out) if out.ndim == 0 else out


def subfbm_covariance(alpha, s, t):
    """Sub-fractional Brownian motion covariance, normalised so Var(1) = 1."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"sub-fBM index alpha must lie in (0, 2), got {alpha}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("sub-fBM covariance is defined for s, t >= 0")
    num = s**alpha + t**alpha - 0.5 * ((s + t) ** alpha + np.abs(s - t) ** alpha)
    out = num / (2.0 - 2.0 ** (alpha - 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CovarianceKernel:
    """Symmetric PSD kernel on R^dimension.

    ``func`` is vectorised: it takes point arrays of shape (P, d) and (Q, d)
    and returns the (P, Q) cross-covariance.
    """

    name: str
    dimension: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    self_similar_index: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    def matrix(self, X, Y=None) -> np.ndarray:
        X = _as_points(X, self.dimension)
        Y = X if Y is None else _as_points(Y, self.dimension)
        return np.asarray(self.func(X, Y), dtype=float)

    def eval(self, s, t) -> float:
        return float(self.matrix(np.atleast_1d(s)[None, :], np.atleast_1d(t)[None, :])[0, 0])

    def variance(self, X) -> np.ndarray:
        X = _as_points(X, self.dimension)
        return np.array([self.func(x[None, :], x[None, :])[0, 0] for x in X], dtype=float)


def _as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, dim) if dim > 1 else X[:, None]
    if X.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got shape {X.shape}")
    return X


def fbm_kernel(alpha: float) -> CovarianceKernel:
    fbm_covariance(alpha, 1.0, 1.0)  # domain check

    def func(X, Y):
        return fbm_covariance(alpha, X[:, 0][:, None], Y[:, 0][None, :])

    return CovarianceKernel(f"fbm(alpha={alpha:g})", 1, func, alpha / 2.0, {"family": "fbm", "alpha": alpha})


def subfbm_kernel(alpha: float) -> CovarianceKernel:
    subfbm_covariance(alpha, 1.0, 1.0)

    def func(X, Y):
        return subfbm_covariance(alpha, X[:, 0][:, None], Y[:, 0][None, :])

    return CovarianceKernel(f"subfbm(alpha={alpha:g})", 1, func, alpha / 2.0, {"family": "subfbm", "alpha": alpha})


def y_kernel(family: str, alpha: float) -> CovarianceKernel:
    if family == "fbm":
        return fbm_kernel(alpha)
    if family == "subfbm":
        return subfbm_kernel(alpha)
    raise UsageError(f"unknown self-similar kernel family '{family}' (expected fbm or subfbm)")


def build_covariance_matrix(kernel: CovarianceKernel, grid: GridSpec) -> np.ndarray:
    M = kernel.matrix(grid.points)
    # kernels are symmetric analytically; remove round-off asymmetry
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class CholeskyFactor:
    factor: np.ndarray
    jitter: float


def cholesky_factor(matrix, schedule: Sequence[float] = JITTER_SCHEDULE) -> CholeskyFactor:
    """Lower Cholesky factor of ``matrix + jitter*I``.

    ``jitter`` is the first entry of ``schedule`` (scaled by trace/dim) for
    which LAPACK succeeds.
    """
    A = np.array(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("cholesky_factor needs a square matrix")
    dim = A.shape[0]
    scale = max(np.trace(A) / dim, 0.0) if dim else 0.0
    if scale == 0.0:
        scale = 1.0
    info = 0
    jitter = 0.0
    for mult in schedule:
        jitter = mult * scale
        L, info = lapack.dpotrf(A + jitter * np.eye(dim), lower=1, clean=1)
        if info == 0:
            return CholeskyFactor(L, jitter)
        if info < 0:
            raise DomainError(f"LAPACK dpotrf rejected argument {-info}")
    raise NotPositiveDefinite(pivot=int(info) - 1, jitter=jitter)


@dataclass(frozen=True)
class SampleBatch:
    grid: GridSpec
    values: np.ndarray
    seed: int
    jitter: float = 0.0


def default_threads() -> int:
    env = os.environ.get("GAUSSEX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"GAUSSEX_THREADS must be an integer, got {env!r}")
    return 1


def block_rng(seed: int, stream: Sequence[int], block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(s) for s in stream) + (int(block),))
    return np.random.Generator(np.random.Philox(ss))


def map_blocks(
    factor: np.ndarray,
    n_reps: int,
    seed: int,
    fn: Callable[[np.ndarray, np.random.Generator], object],
    stream: Sequence[int] = (),
    copies: int = 1,
    threads: Optional[int] = None,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Apply ``fn(values, rng)`` to each replication block, results in block order.

    ``values`` has shape (block, P), or (block, copies, P) when ``copies > 1``
    (independent copies of the field per replication).  ``rng`` is the block
    generator after the normals were drawn and may be used for auxiliary draws.
    """
    if n_reps < 1:
        raise UsageError("n_reps must be >= 1")
    L = np.asarray(factor)
    P = L.shape[0]
    starts = list(range(0, n_reps, block_size))

    def work(b):
        rows = min(block_size, n_reps - starts[b])
        rng = block_rng(seed, stream, b)
        z = rng.standard_normal((rows * copies, P))
        vals = z @ L.T
        if copies > 1:
            vals = vals.reshape(rows, copies, P)
        return fn(vals, rng)

    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(starts) == 1:
        return [work(b) for b in range(len(starts))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(len(starts))))


def sample_paths(
    kernel: CovarianceKernel,
    grid: GridSpec,
    n_reps: int,
    seed: int,
    threads: Optional[int] = None,
) -> SampleBatch:
    chol = cholesky_factor(build_covariance_matrix(kernel, grid))
    blocks = map_blocks(chol.factor, n_reps, seed, lambda v, rng: v, threads=threads)
    return SampleBatch(grid, np.vstack(blocks), int(seed), chol.jitter)
