import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaussex.core import (
    build_covariance_matrix,
    cholesky_factor,
    fbm_covariance,
    fbm_kernel,
    map_blocks,
    sample_paths,
    subfbm_covariance,
    subfbm_kernel,
    y_kernel,
)
from gaussex.errors import DomainError, NotPositiveDefinite, UsageError
from gaussex.grids import interval_grid, points_grid

alphas = st.floats(0.05, 2.0)
times = st.floats(0.0, 10.0)


def test_fbm_examples():
    assert fbm_covariance(1.0, 0.5, 1.0) == pytest.approx(0.5)
    for a in (0.3, 1.0, 1.7, 2.0):
        assert fbm_covariance(a, 1.0, 1.0) == pytest.approx(1.0)
    assert fbm_covariance(1.5, 1.0, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, -1.0, 2.01])
def test_fbm_domain(alpha):
    with pytest.raises(DomainError):
        fbm_covariance(alpha, 0.1, 0.2)


def test_fbm_negative_time():
    with pytest.raises(DomainError):
        fbm_covariance(1.0, -0.1, 0.2)


def test_subfbm_examples():
    assert subfbm_covariance(1.0, 1.0, 1.0) == pytest.approx(1.0)
    assert subfbm_covariance(0.7, 0.0, 0.4) == 0.0
    assert subfbm_covariance(1.0, 1.0, 2.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        subfbm_covariance(2.0, 1.0, 1.0)


@given(alphas, times, times)
def test_fbm_symmetric(a, s, t):
    assert fbm_covariance(a, s, t) == fbm_covariance(a, t, s)


@given(alphas, st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.sampled_from([0.5, 2.0]))
def test_fbm_self_similar(a, s, t, r):
    lhs = fbm_covariance(a, r * s, r * t)
    rhs = r**a * fbm_covariance(a, s, t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


@given(st.floats(0.05, 1.95), st.floats(0.01, 5.0), st.sampled_from([0.5, 2.0, 3.0]))
def test_subfbm_variance_scaling(a, t, r):
    assert subfbm_covariance(a, r * t, r * t) == pytest.approx(r**a * subfbm_covariance(a, t, t), rel=1e-12)


def test_build_matrix_examples():
    k = fbm_kernel(1.0)
    assert build_covariance_matrix(k, points_grid([1.0])).tolist() == [[1.0]]
    M = build_covariance_matrix(k, points_grid([0.5, 1.0]))
    np.testing.assert_allclose(M, [[0.5, 0.5], [0.5, 1.0]])


def test_duplicate_points_rejected():
    with pytest.raises(DomainError):
        points_grid([0.5, 0.5])


def test_cholesky_examples():
    c = cholesky_factor(np.eye(3))
    np.testing.assert_array_equal(c.factor, np.eye(3))
    assert c.jitter == 0.0
    c = cholesky_factor([[0.5, 0.5], [0.5, 1.0]])
    assert c.factor[0, 0] == pytest.approx(math.sqrt(0.5))
    np.testing.assert_allclose(c.factor @ c.factor.T, [[0.5, 0.5], [0.5, 1.0]], atol=1e-15)
    c = cholesky_factor([[1.0, 1.0], [1.0, 1.0]])
    assert c.jitter > 0
    np.testing.assert_allclose(c.factor @ c.factor.T, np.ones((2, 2)) + c.jitter * np.eye(2), atol=1e-14)


def test_cholesky_failure_carries_pivot():
    with pytest.raises(NotPositiveDefinite) as exc:
        cholesky_factor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    assert exc.value.pivot == 2
    assert exc.value.exit_code == 4


@pytest.mark.parametrize("family,alpha", [("fbm", 0.3), ("fbm", 1.0), ("fbm", 1.9), ("fbm", 2.0), ("subfbm", 0.5), ("subfbm", 1.5)])
def test_builtin_kernels_factor_with_small_jitter(family, alpha):
    k = fbm_kernel(alpha) if family == "fbm" else subfbm_kernel(alpha)
    grid = interval_grid(0.0, 2.0, 0.01)  # 201 points, includes the degenerate t = 0
    M = build_covariance_matrix(k, grid)
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() >= -1e-8 * np.trace(M)
    c = cholesky_factor(M)
    assert c.jitter <= 1e-8 * np.trace(M) / len(M)


def test_y_kernel_families():
    assert y_kernel("fbm", 1.0).eval(1.0, 1.0) == 1.0
    assert y_kernel("subfbm", 1.0).eval(1.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(UsageError):
        y_kernel("bifbm", 1.0)


def test_sample_examples():
    b = sample_paths(fbm_kernel(1.0), points_grid([1.0]), 100_000, seed=3)
    assert b.values.shape == (100_000, 1)
    assert abs(b.values[:, 0].var() - 1.0) < 0.02
    b = sample_paths(fbm_kernel(1.0), points_grid([0.5, 1.0]), 100_000, seed=4)
    assert abs(np.cov(b.values.T)[0, 1] - 0.5) < 0.02


def test_sample_determinism_and_threads():
    k, g = fbm_kernel(0.7), interval_grid(0.0, 1.0, 0.05)
    a = sample_paths(k, g, 5000, seed=11, threads=1).values
    b = sample_paths(k, g, 5000, seed=11, threads=3).values
    assert a.tobytes() == b.tobytes()
    c = sample_paths(k, g, 5000, seed=12, threads=1).values
    assert not np.array_equal(a, c)


def test_degenerate_point_is_zero():
    b = sample_paths(fbm_kernel(1.0), interval_grid(0.0, 1.0, 0.1), 1000, seed=0)
    assert np.abs(b.values[:, 0]).max() <= 1e-5


def test_sample_needs_reps():
    with pytest.raises(UsageError):
        sample_paths(fbm_kernel(1.0), points_grid([1.0]), 0, seed=0)


def test_map_blocks_copies_shape():
    L = np.eye(3)
    out = map_blocks(L, 10, 0, lambda v, rng: v.shape, copies=2)
    assert out == [(10, 2, 3)]


def frobenius_errors(seed=20240):
    k = fbm_kernel(1.0)
    g = interval_grid(0.1, 1.0, 0.1)
    true = build_covariance_matrix(k, g)
    errs = []
    for n in (10**3, 10**4, 10**5):
        v = sample_paths(k, g, n, seed=seed).values
        emp = v.T @ v / n  # centred field: no mean subtraction
        errs.append((n, float(np.linalg.norm(emp - true)), 5.0 * float(np.linalg.norm(true)) / math.sqrt(n)))
    return errs


def test_frobenius_convergence():
    errs = frobenius_errors()
    for n, e, bound in errs:
        assert e <= bound
    assert errs[0][1] > errs[1][1] > errs[2][1]
