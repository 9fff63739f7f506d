from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np
from hypothesis import given, settings, strategies as st

from qpspec.lattice import (box_size, canonical_labels, exp_shell_tail, lattice_box, shell_count,
                            shell_ratio_bound)


def brute_shell(nu, r):
    return sum(1 for p in itertools.product(range(-r, r + 1), repeat=nu) if sum(map(abs, p)) == r)


def test_box_order_and_origin():
    box = lattice_box(2, 2)
    assert box.shape == (13, 2)
    assert tuple(box[0]) == (0, 0)
    norms = np.abs(box).sum(axis=1)
    assert np.all(np.diff(norms) >= 0)
    assert not box.flags.writeable


@given(st.integers(1, 3), st.integers(0, 7))
def test_counts_match_enumeration(nu, r):
    assert shell_count(nu, r) == brute_shell(nu, r)
    assert box_size(nu, r) == len(lattice_box(nu, r))


@given(st.integers(1, 4), st.integers(0, 40))
def test_shell_ratio_bound_holds_beyond_start(nu, extra):
    r = nu + extra
    rho = shell_ratio_bound(nu, r)
    for q in range(r, r + 30):
        assert shell_count(nu, q + 1) <= rho * shell_count(nu, q) * (1 + 1e-15)


def test_tail_matches_geometric_closed_form():
    # nu = 1: two points per shell, 2 * x^s / (1 - x)
    x = math.exp(-0.5)
    closed = 2 * x ** 11 / (1 - x)
    got = exp_shell_tail(1, 0.5, 11)
    assert closed <= got <= closed * (1 + 1e-11)


def test_tail_is_upper_bound_against_mpmath():
    for nu, rate, start in [(2, 0.5, 1), (2, 0.5, 13), (3, 0.25, 2), (3, 1.0, 0)]:
        with mpmath.workdps(40):
            exact = mpmath.nsum(lambda r: shell_count(nu, int(r)) * mpmath.e ** (-rate * r), [start, mpmath.inf])
        got = exp_shell_tail(nu, rate, start)
        assert got >= float(exact)
        assert got <= float(exact) * (1 + 1e-10)


@settings(max_examples=30)
@given(st.integers(1, 3), st.floats(0.05, 2.0), st.integers(0, 30))
def test_tail_monotone_in_start(nu, rate, start):
    assert exp_shell_tail(nu, rate, start + 1) <= exp_shell_tail(nu, rate, start)


def test_canonical_labels_pick_positive_representative():
    omega = np.array([1.0, math.sqrt(2.0)])
    labels = canonical_labels(omega, 3)
    assert len(labels) == (box_size(2, 3) - 1) // 2
    assert np.all(labels @ omega > 0)
    assert (-1, 1) in {tuple(m) for m in labels}
