"""
Exact Fincke-Pohst enumeration of short vectors of a positive definite
rational Gram matrix. All arithmetic is done with Fractions; the square
root bounds only widen the search interval and every candidate is checked
exactly.
"""

import logging
from fractions import Fraction
from math import floor, isqrt
from typing import List, Sequence, Tuple

logger = logging.getLogger('ShortVectors')


class NotPositiveDefiniteError(ValueError):
    """Quadratic form is not positive definite"""


def quadratic_decomposition(gram: Sequence[Sequence[Fraction]]) -> Tuple[List[Fraction], List[List[Fraction]]]:
    """
    Complete the square: q(v) = sum_i D_i (v_i + sum_{j>i} mu_ij v_j)^2.
    Returns (D, mu).
    """
    k = len(gram)
    work = [[Fraction(entry) for entry in row] for row in gram]
    diagonal = [Fraction(0)] * k
    mu = [[Fraction(0)] * k for _ in range(k)]
    for i in range(k):
        diagonal[i] = work[i][i]
        if diagonal[i] <= 0:
            raise NotPositiveDefiniteError("Gram matrix is not positive definite")
        for j in range(i + 1, k):
            mu[i][j] = work[i][j] / diagonal[i]
        for j in range(i + 1, k):
            for l in range(j, k):
                work[j][l] -= mu[i][j] * work[i][l]
                work[l][j] = work[j][l]
    return diagonal, mu


def lll_reduce(gram: Sequence[Sequence[Fraction]],
               delta: Fraction = Fraction(3, 4)) -> Tuple[List[List[Fraction]], List[List[int]]]:
    """
    Exact LLL reduction of a positive definite Gram matrix G.

    Returns (R, T) with T unimodular and R = T G T^T: row i of T gives the
    i-th reduced basis vector in the original coordinates.
    """
    k = len(gram)
    g = [[Fraction(entry) for entry in row] for row in gram]
    t = [[int(i == j) for j in range(k)] for i in range(k)]
    diagonal, mu = quadratic_decomposition(g)

    def subtract(i: int, j: int, r: int):
        # b_i <- b_i - r b_j
        for c in range(k):
            t[i][c] -= r * t[j][c]
        old = g[i][:]
        for col in range(k):
            if col != i:
                g[i][col] = old[col] - r * g[j][col]
                g[col][i] = g[i][col]
        g[i][i] = old[i] - 2 * r * old[j] + r * r * g[j][j]

    def swap(i: int, j: int):
        t[i], t[j] = t[j], t[i]
        g[i], g[j] = g[j], g[i]
        for row in g:
            row[i], row[j] = row[j], row[i]

    i = 1
    while i < k:
        for j in range(i - 1, -1, -1):
            r = round(mu[j][i])
            if r:
                subtract(i, j, r)
                diagonal, mu = quadratic_decomposition(g)
        if diagonal[i] >= (delta - mu[i - 1][i] ** 2) * diagonal[i - 1]:
            i += 1
        else:
            swap(i, i - 1)
            diagonal, mu = quadratic_decomposition(g)
            i = max(i - 1, 1)
    return g, t


def evaluate(gram: Sequence[Sequence[Fraction]], v: Sequence[int]) -> Fraction:
    total = Fraction(0)
    k = len(v)
    for i in range(k):
        if v[i]:
            row = gram[i]
            total += v[i] * sum((row[j] * v[j] for j in range(k) if v[j]), Fraction(0))
    return total


def short_vectors(gram: Sequence[Sequence[Fraction]], bound: Fraction,
                  halve: bool = True) -> List[Tuple[Fraction, Tuple[int, ...]]]:
    """
    All nonzero integer vectors v with v G v^T <= bound, as (norm, v) pairs
    sorted by norm then coordinates. With halve=True only one of v, -v is
    returned (the one whose last nonzero coordinate is positive).

    The search runs in an LLL-reduced basis, so skewed Gram matrices cost
    no more than their reduced counterparts.
    """
    bound = Fraction(bound)
    k = len(gram)
    quadratic_decomposition(gram)
    found: List[Tuple[Fraction, Tuple[int, ...]]] = []
    if bound <= 0:
        return found
    reduced, transform = lll_reduce(gram)
    diagonal, mu = quadratic_decomposition(reduced)
    x = [0] * k

    def original(w: Sequence[int]) -> Tuple[int, ...]:
        v = [sum(w[r] * transform[r][c] for r in range(k) if w[r]) for c in range(k)]
        if halve and next(c for c in reversed(v) if c) < 0:
            v = [-c for c in v]
        return tuple(v)

    def search(i: int, remaining: Fraction, zero_above: bool):
        centre = Fraction(0)
        for j in range(i + 1, k):
            if x[j]:
                centre += mu[i][j] * x[j]
        radius = isqrt(floor(remaining / diagonal[i]))
        low = floor(-centre - radius - 1)
        high = floor(-centre + radius + 1)
        if halve and zero_above:
            low = max(low, 0)
        for xi in range(low, high + 1):
            offset = xi + centre
            spent = diagonal[i] * offset * offset
            if spent > remaining:
                continue
            x[i] = xi
            left = remaining - spent
            if i == 0:
                if any(x):
                    found.append((bound - left, original(x)))
            else:
                search(i - 1, left, zero_above and xi == 0)
        x[i] = 0

    search(k - 1, bound, True)
    found.sort()
    logger.debug(f"Enumerated {len(found)} vectors of norm <= {bound} in rank {k}")
    return found
