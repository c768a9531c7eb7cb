"""Independent reference implementations used to cross-check the library.

Everything here is written from the problem definitions directly (plain
Python loops, numpy/LAPACK calls, grid search) and deliberately shares no
code with the package under test.
"""

import math

import numpy as np


def residual_sq_naive(y, b_mat, x) -> float:
    """Double-loop squared residual."""
    m, n = b_mat.shape
    total = 0.0
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += b_mat[i][j] * x[j]
        total += (y[i] - acc) ** 2
    return total


def top_gram_eigenvalue(b_mat) -> float:
    """Exact largest eigenvalue of B.T @ B via LAPACK."""
    return float(np.linalg.eigvalsh(b_mat.T @ b_mat).max())


def _soft(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def energy_naive(b_mat, y, x, lam) -> float:
    return 0.5 * float(np.linalg.norm(y - b_mat @ x) ** 2) + lam * float(np.abs(x).sum())


def prox_two_l1_grid(v, z, lam, gam, lo=-10.0, hi=10.0, step=1e-4):
    """Dense grid search for argmin of 0.5*(x-v)^2 + lam*|x| + gam*|x-z|."""
    grid = np.arange(lo, hi + step, step)
    obj = 0.5 * (grid - v) ** 2 + lam * np.abs(grid) + gam * np.abs(grid - z)
    i = int(np.argmin(obj))
    return float(grid[i]), float(obj[i])


def cd_lasso(b_mat, y, lam, tol=1e-10, max_sweeps=20000):
    """Cyclic coordinate-descent Lasso run to a tight fixed point."""
    m, n = b_mat.shape
    x = np.zeros(n)
    col_sq = (b_mat ** 2).sum(axis=0)
    r = y.copy()
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(n):
            if col_sq[j] == 0.0:
                continue
            old = x[j]
            rho = b_mat[:, j] @ r + col_sq[j] * old
            new = float(_soft(rho, lam)) / col_sq[j]
            if new != old:
                r += b_mat[:, j] * (old - new)
                x[j] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return x


def _scalar_two_l1_min(c, rho, lam, gam, anchor):
    """Exact minimizer of 0.5*c*x^2 - rho*x + lam*|x| + gam*|x - anchor|."""

    def f(x):
        return 0.5 * c * x * x - rho * x + lam * abs(x) + gam * abs(x - anchor)

    cands = [0.0, anchor]
    for s in (-1.0, 1.0):
        for t in (-1.0, 1.0):
            x = (rho - lam * s - gam * t) / c
            if x * s > 0.0 and (x - anchor) * t > 0.0:
                cands.append(x)
    return min(cands, key=f)


def dynamic_coord_min(b_mat, y, anchor, lam, gam, tol=1e-12, max_sweeps=20000):
    """Cyclic exact per-coordinate minimization of the temporal objective.

    Objective: 0.5*||y - B x||^2 + lam*||x||_1 + gam*||x - anchor||_1,
    driven to a coordinate-wise fixed point.
    """
    m, n = b_mat.shape
    x = np.zeros(n)
    col_sq = (b_mat ** 2).sum(axis=0)
    r = y.copy()
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(n):
            c = col_sq[j]
            if c == 0.0:
                continue
            old = x[j]
            rho = b_mat[:, j] @ r + c * old
            new = _scalar_two_l1_min(c, rho, lam, gam, anchor[j])
            if new != old:
                r += b_mat[:, j] * (old - new)
                x[j] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return x


def dynamic_energy_naive(b_mat, y, x, anchor, lam, gam) -> float:
    return (
        0.5 * float(np.linalg.norm(y - b_mat @ x) ** 2)
        + gam * float(np.abs(x - anchor).sum())
        + lam * float(np.abs(x).sum())
    )


def surrogate_naive(b_mat, gram, cross) -> float:
    return 0.5 * float(np.trace(b_mat.T @ b_mat @ gram)) - float(
        np.trace(b_mat.T @ cross)
    )


def bcd_dictionary(b0, gram, cross, unit_c=1.0, tol=1e-14, max_passes=20000):
    """Projected block coordinate descent on the dictionary surrogate.

    Each column moves to the exact constrained minimizer: the unconstrained
    stationary point of the column's quadratic, projected onto the ball of
    radius sqrt(unit_c). Runs to convergence of the surrogate value.
    """
    b_mat = np.array(b0, dtype=float)
    n = b_mat.shape[1]
    prev = surrogate_naive(b_mat, gram, cross)
    for _ in range(max_passes):
        for j in range(n):
            d = gram[j, j]
            if d == 0.0:
                continue
            others = b_mat @ gram[:, j] - b_mat[:, j] * d
            u = (cross[:, j] - others) / d
            nrm = np.linalg.norm(u)
            cap = math.sqrt(unit_c)
            if nrm > cap:
                u = u * (cap / nrm)
            b_mat[:, j] = u
        cur = surrogate_naive(b_mat, gram, cross)
        if abs(prev - cur) <= tol * max(1.0, abs(prev)):
            break
        prev = cur
    return b_mat


def bilinear_naive(pixels, out_h, out_w):
    """Per-pixel bilinear resize with the pixel-center convention."""
    in_h, in_w = pixels.shape
    out = np.empty((out_h, out_w))
    for oy in range(out_h):
        sy = (oy + 0.5) * (in_h / out_h) - 0.5
        sy = min(max(sy, 0.0), in_h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for ox in range(out_w):
            sx = (ox + 0.5) * (in_w / out_w) - 0.5
            sx = min(max(sx, 0.0), in_w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            top = pixels[y0, x0] + fx * (pixels[y0, x1] - pixels[y0, x0])
            bot = pixels[y1, x0] + fx * (pixels[y1, x1] - pixels[y1, x0])
            val = top + fy * (bot - top)
            out[oy, ox] = min(max(val, 0.0), 1.0)
    return out
