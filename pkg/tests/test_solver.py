import numpy as np
import pytest

from asca.linalg import matvec
from asca.solver import (
    SolveOpts,
    SolverDivergenceError,
    dynamic_solve,
    energy,
    fista_solve,
    prox_two_l1,
    soft_threshold,
)

from oracles import (
    cd_lasso,
    dynamic_coord_min,
    dynamic_energy_naive,
    energy_naive,
    prox_two_l1_grid,
)


# -- soft_threshold ----------------------------------------------------------


def test_soft_threshold_basic():
    assert soft_threshold(5.0, 2.0) == 3.0
    assert soft_threshold(-1.0, 2.0) == 0.0
    assert soft_threshold(-5.0, 2.0) == -3.0


def test_soft_threshold_identity_at_zero_tau():
    rng = np.random.default_rng(0)
    for v in rng.normal(size=20):
        assert soft_threshold(float(v), 0.0) == float(v)


def test_soft_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_soft_threshold_array_form():
    out = soft_threshold(np.array([5.0, -1.0, 0.5]), 2.0)
    assert np.array_equal(out, [3.0, 0.0, 0.0])


def test_soft_threshold_properties():
    # odd, non-expansive, and zero exactly on |v| <= tau
    rng = np.random.default_rng(1)
    for _ in range(1000):
        v1, v2 = rng.normal(scale=3.0, size=2)
        tau = abs(rng.normal())
        p1 = soft_threshold(v1, tau)
        p2 = soft_threshold(v2, tau)
        assert soft_threshold(-v1, tau) == -p1
        assert abs(p1 - p2) <= abs(v1 - v2) + 1e-12
        assert (p1 == 0.0) == (abs(v1) <= tau)


# -- prox_two_l1 -------------------------------------------------------------


def test_prox_two_l1_reduces_to_soft_threshold():
    rng = np.random.default_rng(2)
    for _ in range(100):
        v = float(rng.normal(scale=3.0))
        lam = float(abs(rng.normal()))
        assert prox_two_l1(v, rng.normal(), lam, 0.0) == soft_threshold(v, lam)


def test_prox_two_l1_origin_fixed_point():
    assert prox_two_l1(0.0, 0.0, 1.3, 0.7) == 0.0
    assert prox_two_l1(0.0, 0.0, 0.0, 0.0) == 0.0


def test_prox_two_l1_matches_grid_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        v = float(rng.uniform(-8.0, 8.0))
        z = float(rng.uniform(-8.0, 8.0))
        lam = float(rng.uniform(0.0, 3.0))
        gam = float(rng.uniform(0.0, 3.0))
        x = prox_two_l1(v, z, lam, gam)
        gx, gobj = prox_two_l1_grid(v, z, lam, gam)
        obj = 0.5 * (x - v) ** 2 + lam * abs(x) + gam * abs(x - z)
        assert abs(x - gx) <= 1e-3
        assert obj <= gobj + 1e-6


def test_prox_two_l1_beats_reference_points():
    rng = np.random.default_rng(4)
    for _ in range(200):
        v = float(rng.normal(scale=4.0))
        z = float(rng.normal(scale=4.0))
        lam = float(abs(rng.normal()))
        gam = float(abs(rng.normal()))

        def obj(x):
            return 0.5 * (x - v) ** 2 + lam * abs(x) + gam * abs(x - z)

        best = obj(prox_two_l1(v, z, lam, gam))
        assert best <= obj(0.0) + 1e-12
        assert best <= obj(z) + 1e-12
        assert best <= obj(v) + 1e-12


# -- energy ------------------------------------------------------------------


def test_energy_zero_code():
    y = np.array([3.0, 4.0])
    assert energy(np.zeros((2, 2)), y, np.zeros(2), 1.0) == 12.5


def test_energy_perfect_fit_no_penalty():
    rng = np.random.default_rng(5)
    b = rng.normal(size=(3, 3))
    x = rng.normal(size=3)
    assert energy(b, matvec(b, x), x, 0.0) == 0.0


def test_energy_matches_naive():
    rng = np.random.default_rng(6)
    for _ in range(20):
        b = rng.normal(size=(4, 7))
        y = rng.normal(size=4)
        x = rng.normal(size=7)
        assert energy(b, y, x, 0.3) == pytest.approx(energy_naive(b, y, x, 0.3), abs=1e-12)


# -- fista_solve -------------------------------------------------------------


def test_fista_identity_closed_form():
    # orthonormal system: the solution is the soft threshold of y
    opts = SolveOpts(lam=1.0, max_iters=400, rel_tol=1e-15)
    code = fista_solve(np.eye(4), np.array([3.0, 0.0, 0.0, 0.0]), np.zeros(4), opts)
    assert code.coeffs == pytest.approx([2.0, 0.0, 0.0, 0.0], abs=1e-12)
    assert code.nnz == 1


def test_fista_full_shrinkage_returns_exact_zero():
    rng = np.random.default_rng(7)
    b = rng.normal(size=(5, 8))
    y = rng.normal(size=5)
    lam = float(np.abs(b.T @ y).max()) + 1.0
    code = fista_solve(b, y, np.zeros(8), SolveOpts(lam=lam))
    assert np.array_equal(code.coeffs, np.zeros(8))
    assert code.nnz == 0


def test_fista_matches_coordinate_descent_oracle():
    rng = np.random.default_rng(8)
    opts = SolveOpts(lam=0.1, max_iters=2000, rel_tol=1e-12)
    for _ in range(20):
        b = rng.normal(size=(5, 8))
        y = rng.normal(size=5)
        code = fista_solve(b, y, np.zeros(8), opts)
        x_ref = cd_lasso(b, y, 0.1)
        assert energy_naive(b, y, code.coeffs, 0.1) <= energy_naive(b, y, x_ref, 0.1) + 1e-6


def test_fista_never_worse_than_start_or_zero():
    rng = np.random.default_rng(9)
    for _ in range(20):
        b = rng.normal(size=(6, 10))
        y = rng.normal(size=6)
        x0 = rng.normal(size=10)
        code = fista_solve(b, y, x0, SolveOpts(lam=0.2))
        e = energy(b, y, code.coeffs, 0.2)
        assert e <= energy(b, y, x0, 0.2) + 1e-12
        assert e <= energy(b, y, np.zeros(10), 0.2) + 1e-12


def test_fista_energy_log_decreases_within_band():
    rng = np.random.default_rng(10)
    b = rng.normal(size=(8, 12))
    y = rng.normal(size=8)
    log = []
    opts = SolveOpts(lam=0.1, max_iters=200, rel_tol=1e-10)
    fista_solve(b, y, np.zeros(12), opts, energy_log=log)
    assert len(log) >= 2
    for prev, cur in zip(log, log[1:]):
        assert cur <= prev + opts.rel_tol * max(prev, 1.0)


def test_fista_orthonormal_converges_to_closed_form():
    rng = np.random.default_rng(11)
    q, _ = np.linalg.qr(rng.normal(size=(9, 6)))
    y = rng.normal(size=9)
    lam = 0.15
    code = fista_solve(q, y, np.zeros(6), SolveOpts(lam=lam, max_iters=500, rel_tol=1e-14))
    closed = soft_threshold(q.T @ y, lam)
    assert code.coeffs == pytest.approx(closed, abs=1e-8)


def test_fista_reports_divergence_iteration():
    b = np.eye(3)
    y = np.array([1.0, np.inf, 0.0])
    with pytest.raises(SolverDivergenceError, match="iteration 1"):
        fista_solve(b, y, np.zeros(3), SolveOpts(lam=0.1))


def test_fista_shape_validation():
    with pytest.raises(ValueError):
        fista_solve(np.eye(3), np.ones(2), np.zeros(3), SolveOpts())


# -- dynamic_solve -----------------------------------------------------------


def test_dynamic_gamma_zero_matches_fista():
    rng = np.random.default_rng(12)
    for _ in range(20):
        b = rng.normal(size=(5, 8))
        y = rng.normal(size=5)
        x_prev = rng.normal(size=8)
        opts = SolveOpts(lam=0.1, gamma=0.0, max_iters=4000, rel_tol=1e-13)
        dyn = dynamic_solve(b, y, x_prev, np.eye(8), opts)
        fis = fista_solve(b, y, x_prev, opts)
        assert energy_naive(b, y, dyn.coeffs, 0.1) == pytest.approx(
            energy_naive(b, y, fis.coeffs, 0.1), abs=1e-8
        )


def test_dynamic_temporal_term_dominates():
    rng = np.random.default_rng(13)
    b = rng.normal(size=(5, 6))
    y = rng.normal(size=5)
    x_prev = rng.normal(size=6)
    opts = SolveOpts(lam=0.0, gamma=1e6, max_iters=500, rel_tol=1e-12)
    code = dynamic_solve(b, y, x_prev, np.eye(6), opts)
    assert code.coeffs == pytest.approx(x_prev, abs=1e-9)


def test_dynamic_matches_coordinate_minimization_oracle():
    rng = np.random.default_rng(14)
    for _ in range(10):
        b = rng.normal(size=(5, 8))
        y = rng.normal(size=5)
        x_prev = rng.normal(size=8)
        opts = SolveOpts(lam=0.1, gamma=0.1, max_iters=5000, rel_tol=1e-13)
        code = dynamic_solve(b, y, x_prev, np.eye(8), opts)
        x_ref = dynamic_coord_min(b, y, x_prev, 0.1, 0.1)
        got = dynamic_energy_naive(b, y, code.coeffs, x_prev, 0.1, 0.1)
        ref = dynamic_energy_naive(b, y, x_ref, x_prev, 0.1, 0.1)
        assert got <= ref + 1e-5


def test_dynamic_requires_square_transition():
    with pytest.raises(ValueError):
        dynamic_solve(np.eye(3), np.ones(3), np.ones(3), np.ones((2, 3)), SolveOpts())


def test_solve_opts_validation():
    with pytest.raises(ValueError):
        SolveOpts(lam=-0.1)
    with pytest.raises(ValueError):
        SolveOpts(rel_tol=0.0)
    with pytest.raises(ValueError):
        SolveOpts(max_iters=0)
    with pytest.raises(ValueError):
        SolveOpts(gamma=-1.0)
