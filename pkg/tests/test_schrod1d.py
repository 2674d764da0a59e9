import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from grushin.core import (
    CallableProfile,
    ConvergenceError,
    Potential,
    PreconditionError,
    RankDeficientBasis,
    Tolerances,
    parse_potential,
)
from grushin.schrod1d import (
    Grid,
    hermite_eigenfunction,
    rayleigh_max,
    solve_eigen,
    solve_levels_below,
    solve_on_grid,
    truncation_length,
)

HARMONIC = parse_potential("power:gamma=1")


def test_harmonic_oscillator_levels():
    pairs = solve_eigen(HARMONIC, 1, 5)
    for n, p in enumerate(pairs):
        assert p.lam == pytest.approx(2 * n + 1, rel=1e-6)
        assert p.err_est <= 1e-7 * p.lam * 1.01


def test_harmonic_scaling_in_k():
    assert solve_eigen(HARMONIC, 3, 1)[0].lam == pytest.approx(3.0, rel=1e-6)
    assert solve_eigen(HARMONIC, -2, 2)[1].lam == pytest.approx(6.0, rel=1e-6)


def test_shifted_family_constant_offset():
    pot = parse_potential("shifted:s2=1")
    lams = [p.lam for p in solve_eigen(pot, 1, 3)]
    assert_allclose(lams, [2.0, 4.0, 6.0], rtol=1e-6)


def test_exactness_oracle_rational_shift():
    # (2n+1)|k| + k^2 s2 for s2 = 1/2, k = 2
    pot = parse_potential("shifted:s2=1/2")
    lams = [p.lam for p in solve_eigen(pot, 2, 4)]
    assert_allclose(lams, [4.0, 8.0, 12.0, 16.0], rtol=1e-6)


def test_truncation_length_examples():
    lo = math.sqrt(50.0)
    val = truncation_length(HARMONIC, 1, 25.0, 2.0)
    assert lo <= val <= 1.02 * lo
    lo5 = math.sqrt(2.0)
    val5 = truncation_length(HARMONIC, 5, 25.0, 2.0)
    assert lo5 <= val5 <= 1.02 * lo5


def test_truncation_rejects_torus_and_bad_args():
    torus = parse_potential("torus:gamma=1")
    with pytest.raises(PreconditionError):
        truncation_length(torus, 1, 10.0)
    with pytest.raises(PreconditionError):
        truncation_length(HARMONIC, 1, -1.0)
    with pytest.raises(PreconditionError):
        truncation_length(HARMONIC, 1, 10.0, margin=1.0)


def test_truncation_nonconfining_errors():
    flat = Potential("cylinder", 1.0,
                     CallableProfile(lambda x: np.ones_like(np.asarray(x, float))))
    with pytest.raises(ConvergenceError, match="confinement"):
        truncation_length(flat, 1, 10.0)


def test_second_order_convergence():
    # the error of the lowest level drops by >= 3.8 when h is halved
    grid = Grid("line", 511, 8.0)
    errs = []
    for _ in range(3):
        lams, _ = solve_on_grid(HARMONIC, 1, 1, grid)
        errs.append(abs(lams[0] - 1.0))
        grid = grid.refined()
    assert errs[0] / errs[1] >= 3.8
    assert errs[1] / errs[2] >= 3.8


def test_orthogonality_and_normalization():
    pairs = solve_eigen(HARMONIC, 1, 6)
    h = pairs[0].grid.h
    for i, p in enumerate(pairs):
        assert h * np.dot(p.u, p.u) == pytest.approx(1.0, abs=1e-10)
        for q in pairs[i + 1:]:
            assert abs(h * np.dot(p.u, q.u)) <= 1e-8


def test_line_levels_simple_positive_increasing():
    pot = parse_potential("power:gamma=2")
    pairs = solve_eigen(pot, 2, 6)
    lams = np.array([p.lam for p in pairs])
    assert np.all(lams > 0)
    gaps = np.diff(lams)
    errs = np.array([p.err_est for p in pairs])
    assert np.all(gaps > 10.0 * (errs[:-1] + errs[1:]))


def test_ground_state_has_no_sign_change():
    for pot in (HARMONIC, parse_potential("power:gamma=2")):
        ground = solve_eigen(pot, 1, 1)[0]
        body = ground.u[np.abs(ground.u) > 1e-9 * np.max(np.abs(ground.u))]
        assert np.all(body > 0)


def test_refinement_budget_error_carries_best():
    with pytest.raises(ConvergenceError) as info:
        solve_eigen(HARMONIC, 1, 1, Tolerances(eig_rel=1e-15))
    assert info.value.best is not None
    assert info.value.best[0].lam == pytest.approx(1.0, rel=1e-5)


def test_solve_levels_below():
    pairs = solve_levels_below(HARMONIC, 2, 13.0)
    # (2n+1)*2 <= 13: 2, 6, 10
    assert_allclose([p.lam for p in pairs], [2.0, 6.0, 10.0], rtol=1e-6)


# --- Hermite functions -----------------------------------------------------

def test_hermite_values_at_zero():
    assert hermite_eigenfunction(1, 0, 0.0) == pytest.approx(np.pi ** -0.25, rel=1e-12)
    assert hermite_eigenfunction(1, 1, 0.0) == 0.0


def test_hermite_matches_direct_formula():
    from scipy.special import eval_hermite

    xs = np.linspace(-4, 4, 201)
    for k in (1, 4):
        z = xs * math.sqrt(k)
        for n in (0, 1, 2, 5, 9):
            direct = (eval_hermite(n, z) * np.exp(-0.5 * z * z)
                      / math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi)))
            assert_allclose(hermite_eigenfunction(k, n, xs), k ** 0.25 * direct,
                            rtol=1e-10, atol=1e-12)


def test_hermite_scaling_and_norm():
    xs = np.linspace(-6, 6, 5001)
    # phi_{k,n}(x) = k^(1/4) phi_{1,n}(x sqrt(k))
    assert_allclose(hermite_eigenfunction(4, 0, xs),
                    math.sqrt(2.0) * hermite_eigenfunction(1, 0, 2.0 * xs),
                    rtol=1e-12, atol=1e-15)
    for k, n in ((1, 0), (4, 0), (3, 4)):
        vals = hermite_eigenfunction(k, n, xs)
        norm = np.trapezoid(vals * vals, xs)
        assert norm == pytest.approx(1.0, abs=1e-6)


def test_hermite_matches_inverse_iteration_vectors():
    for k, n in ((1, 0), (1, 2), (3, 1), (1, 5)):
        pair = solve_eigen(HARMONIC, k, n + 1)[n]
        x = pair.grid.points()
        h = pair.grid.h
        phi = hermite_eigenfunction(k, n, x)
        phi = phi / math.sqrt(h * np.dot(phi, phi))
        if np.dot(phi, pair.u) < 0:
            phi = -phi
        dist = math.sqrt(h * np.dot(phi - pair.u, phi - pair.u))
        assert dist <= 1e-4


# --- Rayleigh quotients ----------------------------------------------------

def test_rayleigh_of_eigenvectors():
    pairs = solve_eigen(HARMONIC, 1, 4)
    grid = pairs[0].grid
    assert rayleigh_max(HARMONIC, 1, grid, [pairs[0].u]) == pytest.approx(
        pairs[0].lam, rel=1e-8)
    # min-max: the span of the first m eigenvectors realizes lambda_{m-1}
    assert rayleigh_max(HARMONIC, 1, grid, [p.u for p in pairs]) == pytest.approx(
        pairs[3].lam, rel=1e-8)


def test_rayleigh_translate_against_2x2_oracle():
    ground = solve_eigen(HARMONIC, 1, 1)[0]
    grid = ground.grid
    x = grid.points()
    h = grid.h
    u = ground.u
    v = np.interp(x - 0.5, x, u, left=0.0, right=0.0)
    got = rayleigh_max(HARMONIC, 1, grid, [u, v])

    # independent 2x2 pencil via the Dirichlet energy form (summation by parts)
    def energy(f, g):
        df = np.diff(np.concatenate([[0.0], f, [0.0]]))
        dg = np.diff(np.concatenate([[0.0], g, [0.0]]))
        return float(np.dot(df, dg) / h + h * np.dot(x * x * f, g))

    def mass(f, g):
        return float(h * np.dot(f, g))

    a = np.array([[energy(u, u), energy(u, v)], [energy(v, u), energy(v, v)]])
    s = np.array([[mass(u, u), mass(u, v)], [mass(v, u), mass(v, v)]])
    import scipy.linalg

    oracle = float(scipy.linalg.eigh(a, s, eigvals_only=True)[-1])
    assert got == pytest.approx(oracle, rel=1e-9)
    assert got > 1.0


def test_rayleigh_rank_deficient():
    ground = solve_eigen(HARMONIC, 1, 1)[0]
    with pytest.raises(RankDeficientBasis):
        rayleigh_max(HARMONIC, 1, ground.grid, [ground.u, 2.0 * ground.u])


# --- circle problems -------------------------------------------------------

def test_circle_constant_potential_oracle():
    # -u'' + k^2 on the circle: eigenvalues k^2 + j^2 with j = 0, 1, 1, 2, 2
    flat = Potential("torus", 1.0,
                     CallableProfile(lambda x: np.ones_like(np.asarray(x, float))))
    tol = Tolerances(eig_rel=1e-5)
    for k in (1, 2):
        lams = [p.lam for p in solve_eigen(flat, k, 5, tol)]
        assert_allclose(lams, [k * k, k * k + 1, k * k + 1, k * k + 4, k * k + 4],
                        rtol=1e-5)


def test_circle_sine_base_potential():
    pot = parse_potential("torus:gamma=1")
    tol = Tolerances(eig_rel=1e-5)
    pairs = solve_eigen(pot, 1, 4, tol)
    lams = np.array([p.lam for p in pairs])
    assert np.all(lams > 0)
    assert np.all(np.diff(lams) > -1e-12)
    h = pairs[0].grid.h
    for p in pairs:
        assert h * np.dot(p.u, p.u) == pytest.approx(1.0, abs=1e-10)


def test_grid_invariants():
    with pytest.raises(Exception):
        Grid("line", 8, 1.0)
    grid = Grid("line", 255, 5.0)
    assert grid.h == pytest.approx(10.0 / 256)
    assert grid.refined().h == pytest.approx(grid.h / 2)
    circle = Grid("circle", 64)
    assert circle.h == pytest.approx(2 * math.pi / 64)
    assert len(circle.points()) == 64
