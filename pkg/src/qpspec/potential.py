"""Quasi-periodic potentials V(x) = sum_n c(n) exp(i (n . omega) x).

Conventions used throughout the package:

* plane waves are ``exp(i x (n . omega + k))`` and the free dispersion is
  exactly ``k**2`` (the factor 2*pi is absorbed into x and omega);
* the lattice norm |n| is the l1 norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DegenerateFrequencyError
from .lattice import l1, lattice_box

# Four ulps of slack when comparing a stored coefficient against its bound,
# so that c = eps * exp(-kappa0 |n|) * phase is admissible as written.
_ULP_SLACK = 4 * np.finfo(float).eps

Point = tuple[int, ...]


@dataclass(frozen=True)
class FrequencyVector:
    omega: tuple[float, ...]
    a0: float
    b0: float

    def __post_init__(self):
        omega = tuple(float(w) for w in np.atleast_1d(self.omega))
        object.__setattr__(self, "omega", omega)
        if len(omega) < 1:
            raise ValueError("omega needs at least one component")
        if not all(math.isfinite(w) for w in omega):
            raise ValueError("omega components must be finite")
        if all(w == 0.0 for w in omega):
            raise ValueError("omega must not vanish identically")
        if not 0.0 < self.a0 < 1.0:
            raise ValueError(f"Diophantine constant must satisfy 0 < a0 < 1, got a0 = {self.a0}")
        if not self.b0 > len(omega):
            raise ValueError(f"Diophantine exponent must satisfy nu < b0, got b0 = {self.b0}, nu = {len(omega)}")

    @property
    def nu(self) -> int:
        return len(self.omega)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.omega, dtype=float)

    def dot(self, n) -> float:
        return float(np.dot(np.asarray(n, dtype=float), self.array))


@dataclass(frozen=True)
class Violation:
    n: Point | None
    kind: str
    lhs: float
    rhs: float

    @property
    def message(self) -> str:
        where = f"n = {self.n}" if self.n is not None else "potential"
        return f"{where}: {self.kind} violated ({self.lhs:.17g} vs {self.rhs:.17g})"

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class FourierPotential:
    """Finitely supported Fourier data of a real quasi-periodic potential.

    ``coeffs`` maps nonzero lattice points to complex coefficients. The
    hypotheses (Hermitian symmetry, exponential decay, no constant term) are
    not enforced here; :func:`validate_potential` reports them.
    """

    freq: FrequencyVector
    coeffs: Mapping[Point, complex]
    eps: float
    kappa0: float
    _items: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nu = self.freq.nu
        items = []
        for n, c in self.coeffs.items():
            key = tuple(int(v) for v in np.atleast_1d(n))
            if len(key) != nu:
                raise ValueError(f"lattice point {n} has dimension {len(key)}, expected {nu}")
            items.append((key, complex(c)))
        items.sort()
        object.__setattr__(self, "coeffs", dict(items))
        object.__setattr__(self, "_items", tuple(items))

    @property
    def nu(self) -> int:
        return self.freq.nu

    @property
    def support_radius(self) -> int:
        return max((l1(n) for n in self.coeffs), default=0)

    @property
    def abs_sum(self) -> float:
        """sum |c(n)|, an upper bound on sup |V| and on the operator norm of V."""
        return math.fsum(abs(c) for c in self.coeffs.values())

    def points(self) -> np.ndarray:
        return np.array([n for n, _ in self._items], dtype=np.int64).reshape(-1, self.nu)

    def values(self) -> np.ndarray:
        return np.array([c for _, c in self._items], dtype=complex)


def validate_potential(p: FourierPotential) -> list[Violation]:
    """List every violated standing hypothesis; empty means admissible."""
    out: list[Violation] = []
    if not p.eps >= 0.0:
        out.append(Violation(None, "eps >= 0", p.eps, 0.0))
    if not 0.0 < p.kappa0 <= 1.0:
        out.append(Violation(None, "0 < kappa0 <= 1", p.kappa0, 1.0))
    for n, c in sorted(p.coeffs.items()):
        if not any(n):
            out.append(Violation(n, "no coefficient at the origin", abs(c), 0.0))
            continue
        bound = p.eps * math.exp(-p.kappa0 * l1(n))
        if abs(c) > bound * (1.0 + _ULP_SLACK):
            out.append(Violation(n, "|c(n)| <= eps*exp(-kappa0*|n|)", abs(c), bound))
        partner = tuple(-v for v in n)
        mirror = p.coeffs.get(partner)
        if mirror is None:
            if c != 0:
                out.append(Violation(n, "c(-n) == conj(c(n)) (partner missing)", abs(c), 0.0))
        elif abs(mirror - c.conjugate()) > _ULP_SLACK * abs(c):
            out.append(Violation(n, "c(-n) == conj(c(n))", abs(mirror), abs(c)))
    return out


def eval_potential(p: FourierPotential, x):
    """V(x) for scalar or array x; the (rounding-level) imaginary part is dropped."""
    xs = np.asarray(x, dtype=float)
    if not p.coeffs:
        return 0.0 * xs if xs.ndim else 0.0
    freqs = p.points() @ p.freq.array
    vals = np.exp(1j * np.multiply.outer(xs, freqs)) @ p.values()
    out = vals.real
    return out if xs.ndim else float(out)


class DiophantineScan(NamedTuple):
    worst_ratio: float
    worst_n: Point
    min_divisor: float
    min_divisor_n: Point


def diophantine_scan(f: FrequencyVector, N: int) -> DiophantineScan:
    """Worst ratio |n.omega| |n|^b0 over 0 < |n|_1 <= N.

    Of each pair {n, -n} only the representative with n.omega > 0 is
    reported; remaining ties go to the lexicographically smallest point.
    The condition holds on the box iff ``worst_ratio >= f.a0``.
    """
    if N < 1:
        raise ValueError("box radius must be >= 1")
    pts = lattice_box(f.nu, N)[1:]
    dots = pts @ f.array
    zero = np.flatnonzero(dots == 0.0)
    if zero.size:
        raise DegenerateFrequencyError(tuple(int(v) for v in pts[zero[0]]))
    keep = dots > 0
    pts, dots = pts[keep], dots[keep]
    norms = np.abs(pts).sum(axis=1)
    ratios = dots * norms.astype(float) ** f.b0
    # lexsort: last key is primary
    order = np.lexsort(tuple(pts[:, j] for j in range(f.nu - 1, -1, -1)) + (ratios,))
    i = order[0]
    order_d = np.lexsort(tuple(pts[:, j] for j in range(f.nu - 1, -1, -1)) + (dots,))
    j = order_d[0]
    return DiophantineScan(
        float(ratios[i]), tuple(int(v) for v in pts[i]),
        float(dots[j]), tuple(int(v) for v in pts[j]),
    )


def analytic_potential(freq: FrequencyVector, eps: float, kappa0: float, support: int,
                       seed: int = 0, scale: float = 1.0) -> FourierPotential:
    """c(n) = scale * eps * exp(-kappa0 |n|_1) * exp(i theta_n) with Hermitian random phases.

    Phases are drawn from ``numpy.random.default_rng(seed)`` for the
    representatives n with n.omega > 0; c(-n) is the conjugate.
    """
    rng = np.random.default_rng(seed)
    coeffs: dict[Point, complex] = {}
    pts = lattice_box(freq.nu, support)[1:]
    for n in pts:
        if freq.dot(n) <= 0:
            continue
        key = tuple(int(v) for v in n)
        c = scale * eps * math.exp(-kappa0 * l1(key)) * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
        coeffs[key] = complex(c)
        coeffs[tuple(-v for v in key)] = complex(c).conjugate()
    return FourierPotential(freq, coeffs, eps, kappa0)


def cosine_potential(g: float, eps: float | None = None, kappa0: float = 1.0,
                     a0: float = 0.5, b0: float = 2.0) -> FourierPotential:
    """The periodic example nu = 1, omega = 1, c(+-1) = g, i.e. V(x) = 2 g cos x.

    By default eps is the smallest value admitted by the decay bound, g e^kappa0.
    """
    if eps is None:
        eps = abs(g) * math.exp(kappa0)
    coeffs = {(1,): complex(g), (-1,): complex(g)} if g else {}
    return FourierPotential(FrequencyVector((1.0,), a0, b0), coeffs, eps, kappa0)
