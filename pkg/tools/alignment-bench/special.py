"""Survival functions for the chi-square and standard normal distributions."""

from __future__ import annotations

import math

MAX_ITERATIONS = 500
EPSILON = 1e-15
TINY = 1e-300


def gamma_p_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series (x < a + 1)."""
    term = 1.0 / a
    total = term
    denominator = a
    for _ in range(MAX_ITERATIONS):
        denominator += 1.0
        term *= x / denominator
        total += term
        if abs(term) < abs(total) * EPSILON:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q_continued_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction (x >= a + 1)."""
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITERATIONS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPSILON:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError(f'shape must be positive, got {a}.')
    if x < 0:
        raise ValueError(f'x must be nonnegative, got {x}.')
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - gamma_p_series(a, x)
    return gamma_q_continued_fraction(a, x)


def chi_square_sf(x: float, df: int) -> float:
    """P(X > x) for X ~ chi-square(df)."""
    if df < 1:
        raise ValueError(f'df must be >= 1, got {df}.')
    if x <= 0:
        return 1.0
    return min(1.0, max(0.0, regularized_gamma_q(df / 2.0, x / 2.0)))


def normal_sf(z: float) -> float:
    """1 - Phi(z) via erfc, accurate in both tails."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))
