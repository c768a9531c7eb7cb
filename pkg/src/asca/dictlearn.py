"""Online dictionary updates under a unit-ball column constraint.

The dictionary keeps running second-order statistics of the codes it has
seen (sum of x x^T and of y x^T) and refreshes its columns by block
coordinate descent on the induced quadratic surrogate. Growth appends
random unit-norm columns and zero-pads the statistics, leaving every
previously computed reconstruction bit-identical.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .linalg import as_matrix, as_vector

DEAD_ATOM_EPS = 1e-10  # skip columns whose accumulated energy is ~0


@dataclass(frozen=True)
class GrowthRecord:
    """Bookkeeping for one growth event."""

    at_sample: int
    old_dim: int
    added: int
    rng_seed_used: int


@njit(cache=True)
def _odl_pass(b_arr, gram, cross, unit_c):
    m, n = b_arr.shape
    root_c = math.sqrt(unit_c)
    u = np.empty(m)
    for j in range(n):
        d = gram[j, j]
        if d <= DEAD_ATOM_EPS:
            continue
        nrm2 = 0.0
        for i in range(m):
            s = 0.0
            for jj in range(n):
                s += b_arr[i, jj] * gram[jj, j]
            ui = b_arr[i, j] + (cross[i, j] - s) / d
            u[i] = ui
            nrm2 += ui * ui
        denom = math.sqrt(nrm2) / root_c
        if denom > 1.0:
            for i in range(m):
                b_arr[i, j] = u[i] / denom
        else:
            for i in range(m):
                b_arr[i, j] = u[i]


def _random_unit_columns(rng, m: int, k: int) -> np.ndarray:
    cols = rng.uniform(-1.0, 1.0, size=(m, k))
    norms = np.linalg.norm(cols, axis=0)
    for j in np.nonzero(norms < 1e-12)[0]:
        while norms[j] < 1e-12:  # essentially unreachable; keeps the draw well defined
            cols[:, j] = rng.uniform(-1.0, 1.0, size=m)
            norms[j] = np.linalg.norm(cols[:, j])
    return cols / norms


class Dictionary:
    """Basis matrix plus the accumulated statistics that drive its updates."""

    def __init__(self, b_mat, gram_acc, cross_acc, samples_seen: int = 0, unit_c: float = 1.0):
        self.B = as_matrix(b_mat, "B")
        self.gram_acc = as_matrix(gram_acc, "gram_acc")
        self.cross_acc = as_matrix(cross_acc, "cross_acc")
        m, n = self.B.shape
        if self.gram_acc.shape != (n, n):
            raise ValueError(f"gram_acc must be {n}x{n}, got {self.gram_acc.shape}")
        if self.cross_acc.shape != (m, n):
            raise ValueError(f"cross_acc must be {m}x{n}, got {self.cross_acc.shape}")
        if not np.isfinite(self.B).all():
            raise ValueError("B contains non-finite entries")
        self.samples_seen = int(samples_seen)
        self.unit_c = float(unit_c)

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    def accumulate(self, x, y) -> "Dictionary":
        """Fold one (code, input) pair into the running statistics."""
        x = as_vector(x, "x")
        y = as_vector(y, "y")
        if x.shape[0] != self.n or y.shape[0] != self.m:
            raise ValueError(
                f"accumulate shape mismatch: x({x.shape[0]}), y({y.shape[0]}), B{self.B.shape}"
            )
        self.gram_acc += np.outer(x, x)
        self.cross_acc += np.outer(y, x)
        self.samples_seen += 1
        return self

    def odl_update(self, passes: int = 1) -> "Dictionary":
        """Block coordinate descent over columns.

        Each active column j (diagonal statistic above ``DEAD_ATOM_EPS``)
        moves to u = b_j + (cross[:, j] - B @ gram[:, j]) / gram[j, j] and is
        then rescaled into the ball ||b_j||^2 <= unit_c. Dead columns are
        left untouched. Never increases the quadratic surrogate.
        """
        if self.samples_seen < 1:
            raise ValueError("odl_update requires at least one accumulated sample")
        if passes < 1:
            raise ValueError("passes must be >= 1")
        for _ in range(passes):
            _odl_pass(self.B, self.gram_acc, self.cross_acc, self.unit_c)
        return self

    def surrogate_objective(self) -> float:
        """Quadratic model 0.5*tr(B'B G) - tr(B'C) that the column updates descend."""
        bt_b = self.B.T @ self.B
        return 0.5 * float(np.sum(bt_b * self.gram_acc)) - float(
            np.sum(self.B * self.cross_acc)
        )

    def grow(self, ell: int, seed: int) -> GrowthRecord:
        """Append ``ell`` random unit-norm columns; zero-pad the statistics.

        Existing entries are copied bit-identically and old codes are read as
        zero-padded by every consumer, so prior reconstructions are unchanged.
        """
        if ell < 1:
            raise ValueError("ell must be >= 1")
        m, n = self.B.shape
        rng = np.random.default_rng(seed)
        fresh = _random_unit_columns(rng, m, int(ell))
        b_new = np.empty((m, n + ell))
        b_new[:, :n] = self.B
        b_new[:, n:] = fresh
        gram_new = np.zeros((n + ell, n + ell))
        gram_new[:n, :n] = self.gram_acc
        cross_new = np.zeros((m, n + ell))
        cross_new[:, :n] = self.cross_acc
        self.B, self.gram_acc, self.cross_acc = b_new, gram_new, cross_new
        return GrowthRecord(
            at_sample=self.samples_seen, old_dim=n, added=int(ell), rng_seed_used=int(seed)
        )


def init_dictionary(m: int, n: int, seed: int, unit_c: float = 1.0) -> Dictionary:
    """Fresh dictionary: unit-norm uniform(-1, 1) columns, zeroed statistics."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    rng = np.random.default_rng(seed)
    b_mat = _random_unit_columns(rng, m, n)
    return Dictionary(
        b_mat, np.zeros((n, n)), np.zeros((m, n)), samples_seen=0, unit_c=unit_c
    )
