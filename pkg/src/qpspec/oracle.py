"""Real-space cross-check: finite differences on [0, L] and eigenvalue counting.

The integrated density of states N(E) = #{eigenvalues < E} / L is a bulk
quantity, so spurious boundary states inside gaps change it by O(1/L) only.
Dirichlet and Neumann truncations bracket it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import IllConditionedError
from .gaps import GapCatalog
from .potential import FourierPotential, eval_potential
from .report import CheckReport

MAX_H2V = 0.1


@dataclass(frozen=True)
class FiniteDifferenceModel:
    """Three-point discretization of -d^2/dx^2 + V on the grid x_j = j h, 0 <= j <= L/h."""

    L: float
    h: float
    boundary: str  # "dirichlet" or "neumann"
    values: np.ndarray  # V at the grid points used by the matrix

    def __post_init__(self):
        if self.h <= 0 or self.L <= 0:
            raise ValueError("need L > 0 and h > 0")
        n = self.L / self.h
        if abs(n - round(n)) > 1e-9 * n or round(n) < 10:
            raise ValueError(f"L/h = {n!r} must be an integer >= 10")
        if self.boundary not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.boundary!r}")

    @classmethod
    def from_potential(cls, p: FourierPotential, L: float, h: float, boundary: str) -> "FiniteDifferenceModel":
        n = int(round(L / h))
        x = np.arange(n + 1) * h
        if boundary == "dirichlet":
            x = x[1:-1]
        values = np.asarray(eval_potential(p, x), dtype=float)
        model = cls(L, h, boundary, values)
        if h * h * float(np.abs(values).max(initial=0.0)) > MAX_H2V:
            raise IllConditionedError(f"h^2 max|V| = {h * h * np.abs(values).max():.3g} exceeds {MAX_H2V}")
        return model

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        inv = 1.0 / (self.h * self.h)
        d = 2.0 * inv + self.values
        if self.boundary == "neumann":
            # symmetric reflecting ends: one neighbour only
            d = d.copy()
            d[0] -= inv
            d[-1] -= inv
        e = np.full(d.size - 1, -inv)
        return d, e

    def count_below(self, E_grid) -> np.ndarray:
        """Number of eigenvalues < E for each E, by the LDL^T inertia (Sturm) recursion."""
        d, e = self.tridiagonal()
        E = np.atleast_1d(np.asarray(E_grid, dtype=float))
        e2 = e * e
        tiny = np.finfo(float).tiny ** 0.5
        piv = d[0] - E
        piv = np.where(piv == 0.0, -tiny, piv)
        count = (piv < 0).astype(np.int64)
        for i in range(1, d.size):
            piv = (d[i] - E) - e2[i - 1] / piv
            piv = np.where(piv == 0.0, -tiny, piv)
            count += piv < 0
        return count

    def eigenvalue(self, index: int) -> float:
        """The index-th smallest eigenvalue (0-based)."""
        d, e = self.tridiagonal()
        return float(eigvalsh_tridiagonal(d, e, select="i", select_range=(index, index))[0])


def ids_estimate(p: FourierPotential, L: float, h: float, E_grid) -> tuple[np.ndarray, np.ndarray]:
    """(Dirichlet, Neumann) counting functions divided by L on E_grid."""
    out = []
    for bc in ("dirichlet", "neumann"):
        model = FiniteDifferenceModel.from_potential(p, L, h, bc)
        out.append(model.count_below(E_grid) / L)
    return out[0], out[1]


def discretization_allowance(E: float, L: float, h: float) -> float:
    """Change of the counting function under h -> h/2 we accept: boundary plus O(h^2 E^1.5) terms."""
    return 2.0 / L + 10.0 * h * h * abs(E) ** 1.5 / math.pi


def resolution(m_dot_omega: float, L: float) -> float:
    """Mean level spacing of the box near the energy of the gap with |m . omega| given."""
    return math.pi * abs(m_dot_omega) / L


def gap_label_check(cat: GapCatalog, p: FourierPotential, L: float = 2000.0, h: float = 0.02) -> CheckReport:
    """Compare resolvable catalog gaps with finite-difference counting.

    For each gap wider than the local level spacing: the counting function
    is flat across the gap within 2/L, equals |m . omega| / (2 pi) there
    within 5/L, and the finite-difference band edges next to the gap match
    the catalog edges within max(4 pi / L, 10 h^2 E).
    """
    omega = p.freq.array
    models = [FiniteDifferenceModel.from_potential(p, L, h, bc) for bc in ("dirichlet", "neumann")]
    worst, offender, findings = math.inf, None, []
    rows: dict[str, object] = {}
    selected = 0
    for g in cat.gaps:
        speed = abs(float(np.dot(g.m, omega)))
        if g.closed or g.width <= resolution(speed, L):
            continue
        selected += 1
        target = speed / (2.0 * math.pi)
        inner = np.array([g.e_minus + 0.05 * g.width, g.e_minus + 0.5 * g.width, g.e_plus - 0.05 * g.width])
        for model in models:
            ids = model.count_below(inner) / L
            flat = float(2.0 / L - (ids.max() - ids.min()))
            label = 5.0 / L - abs(float(ids[1]) - target)
            for margin, what in ((flat, "flat"), (label, "label")):
                if margin < worst:
                    worst, offender = margin, (g.m, model.boundary, what)
            if flat < 0:
                findings.append(f"gap {g.m} ({model.boundary}): counting varies by {ids.max() - ids.min():.3g}")
            if label < 0:
                findings.append(f"gap {g.m} ({model.boundary}): plateau {ids[1]:.6g} vs {target:.6g}")
            # band edges: last eigenvalue below the gap centre and first above it
            j = int(model.count_below([0.5 * (g.e_minus + g.e_plus)])[0])
            lo, hi = model.eigenvalue(j - 1), model.eigenvalue(j)
            tol = max(4.0 * math.pi / L, 10.0 * h * h * g.e_plus)
            edge = float(tol) - max(abs(lo - g.e_minus), abs(hi - g.e_plus))
            if edge < worst:
                worst, offender = edge, (g.m, model.boundary, "edges")
            if edge < 0:
                findings.append(f"gap {g.m} ({model.boundary}): FD edges {lo!r}, {hi!r} vs "
                                f"{g.e_minus!r}, {g.e_plus!r}")
            rows[f"{g.m} {model.boundary}"] = (f"plateau={float(ids[1])!r} target={target!r} "
                                              f"fd_edges=({lo!r}, {hi!r})")
    return CheckReport("gap_labels", not findings, worst, offender, findings,
                       {"L": L, "h": h, "selected": selected, **rows})
