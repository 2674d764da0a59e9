"""Shared test oracles, independent of the implementation paths they check."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from grushin.concentration import ModeCoefficients, Strip, ratio_closed_form
from grushin.core import Perturbation, Potential
from grushin.schrod1d import Grid, solve_on_grid


def enumeration_multiplicities(limit: int) -> np.ndarray:
    """Lattice-enumeration multiplicity table for s2 = 0: mult[E] counts all
    (k, n) in Z* x N with (2n+1)|k| = E, by scanning odd numbers times k."""
    mult = np.zeros(limit + 1, dtype=np.int64)
    for odd in range(1, limit + 1, 2):
        mult[odd::odd] += 2
    return mult


def brute_count(e_max: int, s2_num: int = 0, s2_den: int = 1) -> int:
    """Direct double-loop eigenvalue count for small caps."""
    total = 0
    k = 1
    while k * s2_den + k * k * s2_num <= e_max * s2_den:
        n = 0
        while ((2 * n + 1) * k) * s2_den + k * k * s2_num <= e_max * s2_den:
            n += 1
        total += n
        k += 1
    return 2 * total


def brute_force_min_ratio(k: int, w: Strip) -> float:
    """Projectively reduced brute-force minimizer of the concentration ratio:
    (alpha, beta) = (cos u, sin u e^{iv}) sweeps representatives of every
    coefficient ray; a coarse grid seeds a local polish."""

    def objective(params):
        u, v = params
        c = ModeCoefficients(math.cos(u), 0.0, math.sin(u) * math.cos(v),
                             math.sin(u) * math.sin(v))
        if c.alpha0 == c.alpha1 == c.beta0 == c.beta1 == 0.0:
            return math.inf
        return ratio_closed_form(c, k, w)

    us = np.linspace(1e-4, math.pi / 2 - 1e-4, 121)
    vs = np.linspace(0.0, 2.0 * math.pi, 241)
    best = (math.inf, 0.0, 0.0)
    for u in us:
        for v in vs:
            val = objective((u, v))
            if val < best[0]:
                best = (val, u, v)
    polish = minimize(objective, [best[1], best[2]], method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    return min(best[0], float(polish.fun))


def central_difference_slope(potential: Potential, w: Perturbation, k: int,
                             n: int, grid: Grid, delta: float) -> float:
    """Fourth-order central difference of lambda_n(t) along
    V + t * base * W on a fixed grid (the grid-truncation bias is smooth in t
    and cancels in the difference)."""
    from grushin.perturb import perturbed_potential

    def lam(t: float) -> float:
        lams, _ = solve_on_grid(perturbed_potential(potential, w, t), k, n + 1, grid)
        return float(lams[n])

    return (lam(-2 * delta) - 8 * lam(-delta) + 8 * lam(delta) - lam(2 * delta)) / (12 * delta)
