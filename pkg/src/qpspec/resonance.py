"""Small-denominator bookkeeping: resonance points, windows and clusters.

Resonance points are k_n = -(n . omega)/2, windows are the open intervals
(k_n - delta(n), k_n + delta(n)) with delta(n) = a0 (1 + |n|_1)^(-b0 - 3).
Membership in the set of quasi-momenta with finitely many resonances cannot
be decided by a computer, so everything here is relative to a search box
|n|_1 <= N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonresonantError
from .lattice import l1, lattice_box
from .potential import FrequencyVector, Point


def _nonzero(n) -> tuple[int, ...]:
    key = tuple(int(v) for v in np.atleast_1d(n))
    if not any(key):
        raise ValueError("n must be a nonzero lattice point")
    return key


def k_point(n, f: FrequencyVector) -> float:
    return -f.dot(_nonzero(n)) / 2.0


def delta(n, f: FrequencyVector) -> float:
    return f.a0 * (1.0 + l1(_nonzero(n))) ** (-f.b0 - 3.0)


def _box_data(f: FrequencyVector, N: int):
    pts = lattice_box(f.nu, N)[1:]
    kn = -(pts @ f.array) / 2.0
    dn = f.a0 * (1.0 + np.abs(pts).sum(axis=1)) ** (-f.b0 - 3.0)
    return pts, kn, dn


@dataclass(frozen=True)
class ResonantIndices:
    """Ordered resonant indices n^(0), n^(1), ... and whether the l1 ordering had ties."""

    indices: tuple[Point, ...]
    tie: bool

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]


def resonant_indices(k: float, f: FrequencyVector, N: int) -> ResonantIndices:
    """All n with 0 < |n|_1 <= N and |k - k_n| < delta(n), by (|n|_1, lex)."""
    if N < 1:
        raise ValueError("box radius must be >= 1")
    pts, kn, dn = _box_data(f, N)
    hit = np.abs(k - kn) < dn
    sel = [tuple(int(v) for v in p) for p in pts[hit]]  # box order is already (|n|, lex)
    norms = [l1(p) for p in sel]
    tie = len(set(norms)) != len(norms)
    return ResonantIndices(tuple(sel), tie)


def resonance_points_between(k1: float, k2: float, f: FrequencyVector, N: int):
    """Lattice points n (0 < |n|_1 <= N) with k1 < k_n < k2, and their deltas."""
    pts, kn, dn = _box_data(f, N)
    sel = (kn > k1) & (kn < k2)
    return pts[sel], dn[sel]


@dataclass(frozen=True)
class ResonanceCluster:
    k: float
    resonant_indices: tuple[Point, ...]
    cluster: frozenset[Point]
    search_radius: int
    tie: bool = False
    # cluster after each recursion step, m^(0), m^(1), ...
    history: tuple[frozenset[Point], ...] = ()

    @property
    def ell(self) -> int:
        return len(self.resonant_indices) - 1


def build_cluster(k: float, f: FrequencyVector, N: int) -> ResonanceCluster:
    """m^(0) = {0, n^(0)};  m^(l) = m^(l-1) u { n^(l) - x : x in m^(l-1) }."""
    res = resonant_indices(k, f, N)
    if not res.indices:
        raise NonresonantError(f"k = {k!r} has no resonant index with |n|_1 <= {N}")
    zero = (0,) * f.nu
    current = frozenset({zero, res[0]})
    history = [current]
    for n in res.indices[1:]:
        reflected = {tuple(a - b for a, b in zip(n, x)) for x in current}
        current = current | reflected
        history.append(current)
    return ResonanceCluster(k, res.indices, current, N, res.tie, tuple(history))


def cluster_or_origin(k: float, f: FrequencyVector, N: int) -> ResonanceCluster:
    """build_cluster, falling back to the trivial cluster {0} at nonresonant k."""
    try:
        return build_cluster(k, f, N)
    except NonresonantError:
        zero = (0,) * f.nu
        return ResonanceCluster(k, (), frozenset({zero}), N, False, (frozenset({zero}),))
