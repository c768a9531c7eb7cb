"""Dense float64 kernels with a pinned summation order.

Every reduction here runs left to right in row-major order through explicit
JIT-compiled loops instead of BLAS calls. That makes results reproducible
run to run and bit-invariant under zero padding: appending zero coefficients
(with matching extra columns) to a linear system never changes a previously
computed product or residual, which the growth machinery relies on.
"""

import math

import numpy as np
from numba import njit

__all__ = [
    "as_matrix",
    "as_vector",
    "matvec",
    "matvec_t",
    "vdot",
    "residual_sq",
    "lipschitz_bound",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a C-contiguous float64 1-D array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={arr.ndim}")
    return arr


@njit(cache=True)
def _matvec(m_arr, v):
    out = np.empty(m_arr.shape[0])
    for i in range(m_arr.shape[0]):
        s = 0.0
        for j in range(m_arr.shape[1]):
            s += m_arr[i, j] * v[j]
        out[i] = s
    return out


@njit(cache=True)
def _matvec_t(m_arr, v):
    out = np.empty(m_arr.shape[1])
    for j in range(m_arr.shape[1]):
        s = 0.0
        for i in range(m_arr.shape[0]):
            s += m_arr[i, j] * v[i]
        out[j] = s
    return out


@njit(cache=True)
def _vdot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def _residual_sq(y, m_arr, x):
    total = 0.0
    for i in range(m_arr.shape[0]):
        s = 0.0
        for j in range(m_arr.shape[1]):
            s += m_arr[i, j] * x[j]
        r = y[i] - s
        total += r * r
    return total


def matvec(m_arr, v) -> np.ndarray:
    """Row-major, left-to-right matrix-vector product M @ v."""
    m_arr = as_matrix(m_arr, "M")
    v = as_vector(v, "v")
    if m_arr.shape[1] != v.shape[0]:
        raise ValueError(f"matvec shape mismatch: {m_arr.shape} @ ({v.shape[0]},)")
    return _matvec(m_arr, v)


def matvec_t(m_arr, v) -> np.ndarray:
    """Transposed product M.T @ v with the same pinned summation order."""
    m_arr = as_matrix(m_arr, "M")
    v = as_vector(v, "v")
    if m_arr.shape[0] != v.shape[0]:
        raise ValueError(f"matvec_t shape mismatch: {m_arr.shape}.T @ ({v.shape[0]},)")
    return _matvec_t(m_arr, v)


def vdot(a, b) -> float:
    """Left-to-right dot product."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"vdot length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(_vdot(a, b))


def residual_sq(y, b_mat, x) -> float:
    """Squared reconstruction residual ||y - B x||_2^2 (no 1/2 factor)."""
    b_mat = as_matrix(b_mat, "B")
    y = as_vector(y, "y")
    x = as_vector(x, "x")
    if y.shape[0] != b_mat.shape[0] or x.shape[0] != b_mat.shape[1]:
        raise ValueError(
            f"residual_sq shape mismatch: y({y.shape[0]}), B{b_mat.shape}, x({x.shape[0]})"
        )
    return float(_residual_sq(y, b_mat, x))


def _start_vectors(n: int):
    # the uniform vector first; basis vectors only if it lands in the null space
    yield np.full(n, 1.0 / math.sqrt(n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        yield e


def lipschitz_bound(b_mat, iters: int = 200, tol: float = 1e-6) -> float:
    """Safe upper estimate of the largest eigenvalue of B.T @ B.

    Power iteration on the Gram operator with a 1.01 safety factor on the
    final Rayleigh quotient. The estimate is recomputed cheaply per solve
    because the matrix changes between samples. An all-zero matrix returns
    the degenerate fallback 1.0.
    """
    b_mat = as_matrix(b_mat, "B")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not b_mat.any():
        return 1.0
    for v in _start_vectors(b_mat.shape[1]):
        lam_prev = -1.0
        lam = 0.0
        dead = False
        for _ in range(iters):
            w = _matvec_t(b_mat, _matvec(b_mat, v))
            lam = float(_vdot(v, w))
            wn = math.sqrt(float(_vdot(w, w)))
            if wn == 0.0:
                dead = True  # start vector was in the null space; try the next
                break
            v = w / wn
            if lam_prev >= 0.0 and abs(lam - lam_prev) <= tol * lam:
                return 1.01 * lam
            lam_prev = lam
        if not dead:
            return 1.01 * lam
    return 1.0  # unreachable for nonzero B; kept as a simple guarantee
