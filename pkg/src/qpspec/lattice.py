"""Integer lattice bookkeeping: l1 boxes, shells and shell sums."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

# Relative inflation applied to floating-point shell sums so that the
# returned value stays an upper bound after rounding.
_ROUNDING_SLACK = 1e-12


def l1(n) -> int:
    return int(sum(abs(int(c)) for c in n))


@lru_cache(maxsize=64)
def _box(nu: int, radius: int) -> np.ndarray:
    pts = [p for p in itertools.product(range(-radius, radius + 1), repeat=nu)
           if sum(abs(c) for c in p) <= radius]
    pts.sort(key=lambda p: (sum(abs(c) for c in p), p))
    arr = np.array(pts, dtype=np.int64).reshape(len(pts), nu)
    arr.setflags(write=False)
    return arr


def lattice_box(nu: int, radius: int) -> np.ndarray:
    """All n in Z^nu with |n|_1 <= radius, sorted by (|n|_1, lexicographic).

    The origin is always row 0. The returned array is read-only and shared.
    """
    if nu < 1 or radius < 0:
        raise ValueError("need nu >= 1 and radius >= 0")
    return _box(int(nu), int(radius))


def box_size(nu: int, radius: int) -> int:
    """Number of lattice points with |n|_1 <= radius (Delannoy-type count)."""
    return sum(2 ** j * math.comb(nu, j) * math.comb(radius, j) for j in range(min(nu, radius) + 1))


def shell_count(nu: int, r: int) -> int:
    """#{n in Z^nu : |n|_1 = r}."""
    if r == 0:
        return 1
    return sum(2 ** j * math.comb(nu, j) * math.comb(r - 1, j - 1) for j in range(1, min(nu, r) + 1))


def shell_ratio_bound(nu: int, r: int) -> float:
    """Upper bound on shell_count(nu, q + 1) / shell_count(nu, q) valid for all q >= r >= nu.

    Each summand C(q-1, j-1) grows by q / (q - j + 1) <= q / (q - nu + 1), and that
    factor decreases in q.
    """
    if r < nu:
        raise ValueError("bound only valid for r >= nu")
    return r / (r - nu + 1)


def exp_shell_tail(nu: int, rate: float, start: int) -> float:
    """Rigorous upper bound on sum_{r >= start} shell_count(nu, r) * exp(-rate * r).

    Shells are summed exactly until a term drops below 1e-30 of the running
    sum (and the ratio bound is below one); the remainder is bounded by a
    geometric series using :func:`shell_ratio_bound`.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    start = max(int(start), 0)
    x = math.exp(-rate)
    total = 0.0
    r = start
    while True:
        term = math.exp(math.log(shell_count(nu, r)) - rate * r)
        total += term
        if r >= nu:
            rho = shell_ratio_bound(nu, r) * x
            if rho < 1.0 and (term < 1e-30 * total or term < 1e-300):
                total += term * rho / (1.0 - rho)
                break
        r += 1
    return total * (1.0 + _ROUNDING_SLACK)


def canonical_labels(omega: np.ndarray, radius: int) -> np.ndarray:
    """Nonzero lattice points with |m|_1 <= radius and m . omega > 0.

    m and -m index the same spectral gap; the representative with
    m . omega > 0 (resonance point k_m < 0) is kept. Order is (|m|_1, lex).
    """
    omega = np.asarray(omega, dtype=float)
    pts = lattice_box(omega.size, radius)[1:]
    dots = pts @ omega
    return pts[dots > 0]
