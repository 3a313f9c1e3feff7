"""
Bessel functions of the first kind and their zeros.

J_n(x) uses the ascending series below x = 12. Above it, J_0 and J_1 come
from Hankel's asymptotic expansion and higher orders from upward
recurrence, which is stable for n < x.
"""

import math
from functools import lru_cache

from scipy.optimize import brentq

from utils.errors import ArgumentError

SERIES_LIMIT = 12.0
MAX_ORDER = 10
MAX_INDEX = 10
SCAN_STEP = 0.2


def _series(order: int, x: float) -> float:
    half = 0.5 * x
    term = half ** order / math.factorial(order)
    terms = [term]
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (k + order))
        terms.append(term)
        if abs(term) < 1e-18 * max(abs(terms[0]), 1e-300) and k > half:
            break
    return math.fsum(terms)


def _hankel(order: int, x: float) -> float:
    """Asymptotic J_order(x) for large x; order 0 or 1."""
    mu = 4.0 * order * order
    p_sum, q_sum = 1.0, 0.0
    coefficient = 1.0
    previous = math.inf
    k = 0
    while True:
        k += 1
        coefficient *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(coefficient) >= previous or abs(coefficient) < 1e-17:
            break
        previous = abs(coefficient)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q_sum += sign * coefficient
        else:
            p_sum += sign * coefficient
    phase = x - (0.5 * order + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p_sum * math.cos(phase) - q_sum * math.sin(phase))


def bessel_j(order: int, x: float) -> float:
    """J_order(x) for integer order >= 0 and x >= 0."""
    if order < 0:
        raise ArgumentError(f"order must be >= 0, got {order}")
    x = float(x)
    if x < 0:
        raise ArgumentError(f"x must be >= 0, got {x}")
    if x < SERIES_LIMIT:
        return _series(order, x)
    j_prev, j_curr = _hankel(0, x), _hankel(1, x)
    if order == 0:
        return j_prev
    for n in range(1, order):
        j_prev, j_curr = j_curr, (2.0 * n / x) * j_curr - j_prev
    return j_curr


@lru_cache(maxsize=None)
def bessel_zero(order: int, index: int) -> float:
    """
    The (index + 1)-th positive zero of J_order.

    Pillar modes shift the order by one: HE(n_phi, n_r + 1) uses
    bessel_zero(|n_phi - 1|, n_r), so HE11 takes bessel_zero(0, 0) = 2.4048
    while bessel_zero(1, 0) is 3.8317.

    Zeros are bracketed by a sign-change scan starting at x = order (J_n has
    no zeros below n) and polished with Brent's method.

    Args:
        order: Bessel order, 0..10
        index: Zero index, 0..10 (0 = first zero)
    """
    if not 0 <= order <= MAX_ORDER:
        raise ArgumentError(f"order must be in 0..{MAX_ORDER}, got {order}")
    if not 0 <= index <= MAX_INDEX:
        raise ArgumentError(f"index must be in 0..{MAX_INDEX}, got {index}")

    a = max(float(order), SCAN_STEP)
    fa = bessel_j(order, a)
    found = -1
    while True:
        b = a + SCAN_STEP
        fb = bessel_j(order, b)
        if fb == 0.0:
            found += 1
            if found == index:
                return b
        elif fa * fb < 0:
            found += 1
            if found == index:
                return brentq(lambda t: bessel_j(order, t), a, b, xtol=1e-13)
        a, fa = b, fb
