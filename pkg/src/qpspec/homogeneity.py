"""Carleson homogeneity of S = [bottom, inf) minus a union of open gaps.

S is homogeneous with constant tau when |(E - s, E + s) n S| > tau s for
all E in S and s > 0. For a finite gap list the window measure m(E, s) is
piecewise linear in (E, s), with kinks on the lines E - s = x and E + s = x
through the breakpoints x (bottom and gap endpoints). On every cell of that
line arrangement m/s is a linear-fractional function, so its minimum over
a polygon is attained at a vertex: enumerating vertices gives the exact
minimum over a rectangle of (E, s) values, with no interpolation loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationInconclusiveError, ConstantsTooWeakError
from .gaps import GapCatalog, catalog_digest, verify_bottom_separation, verify_gap_separation
from .lattice import exp_shell_tail, shell_ratio_bound
from .report import CheckReport


@dataclass(frozen=True)
class SpectrumSet:
    """[bottom, inf) minus the open gaps (lo[i], hi[i]); tail_allowance covers unlisted gaps."""

    bottom: float
    lo: np.ndarray
    hi: np.ndarray
    tail_allowance: float = 0.0
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("gap endpoint arrays differ in length")
        if np.any(lo >= hi):
            raise ValueError("every gap needs lo < hi")
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
        # the part of a gap below bottom is not in S anyway
        keep = hi > self.bottom
        lo, hi = np.maximum(lo[keep], self.bottom), hi[keep]
        if lo.size > 1 and np.any(lo[1:] < hi[:-1]):
            i = int(np.flatnonzero(lo[1:] < hi[:-1])[0])
            raise ValueError(f"gaps ({lo[i]!r}, {hi[i]!r}) and ({lo[i + 1]!r}, {hi[i + 1]!r}) overlap")
        if not self.tail_allowance >= 0:
            raise ValueError("tail_allowance must be >= 0")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        cum = np.concatenate(([0.0], np.cumsum(hi - lo)))
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_gaps(cls, bottom: float, gaps, tail_allowance: float = 0.0) -> "SpectrumSet":
        gaps = list(gaps)
        lo = np.array([g[0] for g in gaps], dtype=float)
        hi = np.array([g[1] for g in gaps], dtype=float)
        return cls(bottom, lo, hi, tail_allowance)

    @classmethod
    def from_catalog(cls, cat: GapCatalog, widen: bool = True) -> "SpectrumSet":
        """Inner (widen=True) or outer (widen=False) approximation of the computed spectrum.

        The inner set grows every gap by its err, raises the bottom by
        bottom_err and carries the tail bound: its measures are lower bounds.
        The outer set shrinks gaps and lowers the bottom: it contains the
        spectrum, so its measures are upper bounds.
        """
        lo, hi = [], []
        for g in cat.gaps:
            a, b = (g.e_minus - g.err, g.e_plus + g.err) if widen else (g.e_minus + g.err, g.e_plus - g.err)
            if a < b:
                lo.append(a)
                hi.append(b)
        if widen:
            return cls(cat.bottom + cat.bottom_err, np.array(lo), np.array(hi), cat.tail_bound)
        return cls(cat.bottom - cat.bottom_err, np.array(lo), np.array(hi), 0.0)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate(([self.bottom], np.column_stack((self.lo, self.hi)).reshape(-1)))

    def bands(self) -> list[tuple[float, float]]:
        """Closed bands [u, v] of S; the last one has v = inf."""
        starts = np.concatenate(([self.bottom], self.hi))
        ends = np.concatenate((self.lo, [math.inf]))
        return [(float(u), float(v)) for u, v in zip(starts, ends) if u <= v]

    def contains(self, E) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        if not self.lo.size:
            return E >= self.bottom
        j = np.searchsorted(self.lo, E, side="left") - 1
        inside_gap = (j >= 0) & (E < np.where(j >= 0, self.hi[np.maximum(j, 0)], -np.inf))
        return (E >= self.bottom) & ~inside_gap

    def gap_length_below(self, x) -> np.ndarray:
        """Total gap length in (-inf, x]."""
        x = np.asarray(x, dtype=float)
        if not self.lo.size:
            return np.zeros_like(x)
        j = np.searchsorted(self.lo, x, side="right")  # gaps starting at or before x
        last = np.maximum(j - 1, 0)
        partial = np.clip(x - self.lo[last], 0.0, self.hi[last] - self.lo[last])
        return np.where(j > 0, self._cum[last] + partial, 0.0)

    def measure(self, x0, x1) -> np.ndarray:
        """|[x0, x1] n S| (vectorized, x0 <= x1)."""
        x0 = np.maximum(np.asarray(x0, dtype=float), self.bottom)
        x1 = np.maximum(np.asarray(x1, dtype=float), self.bottom)
        out = (x1 - x0) - (self.gap_length_below(x1) - self.gap_length_below(x0))
        return np.maximum(out, 0.0)


def intersect_measure(S: SpectrumSet, E: float, sigma: float) -> tuple[float, float]:
    """(lower, upper) for |(E - sigma, E + sigma) n S|.

    upper is the exact measure against the listed gaps, lower subtracts the
    tail allowance once (every unlisted gap might fall in this window).
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    upper = float(S.measure(E - sigma, E + sigma))
    return max(0.0, upper - S.tail_allowance), upper


@dataclass(frozen=True)
class HomogeneityCertificate:
    verdict: str  # "pass", "fail" or "advisory"
    tau_target: float
    sigma_range: tuple[float, float]
    tested_points: int
    min_ratio: float
    argmin: tuple[float, float]
    error_budget: float
    witness: tuple[float, float] | None = None
    provenance: str = ""
    notes: tuple[str, ...] = ()

    def lines(self) -> list[str]:
        out = [
            f"verdict: {self.verdict}",
            f"tau: {self.tau_target!r}",
            f"sigma_min: {self.sigma_range[0]!r}",
            f"sigma_max: {self.sigma_range[1]!r}",
            f"tested_points: {self.tested_points}",
            f"min_ratio: {self.min_ratio!r}",
            f"argmin_E: {self.argmin[0]!r}",
            f"argmin_sigma: {self.argmin[1]!r}",
            f"error_budget: {self.error_budget!r}",
            f"witness: {'none' if self.witness is None else f'{self.witness[0]!r} {self.witness[1]!r}'}",
            f"provenance: {self.provenance or 'none'}",
        ]
        out.extend(f"note: {n}" for n in self.notes)
        return out

    def summary(self) -> str:
        return (f"{self.verdict.upper()} {self.min_ratio!r} {self.tau_target!r} "
                f"{self.sigma_range[0]!r} {self.sigma_range[1]!r}")


def _candidates(S: SpectrumSet, bands, smin: float, smax: float, grid: int):
    """Vertices of the arrangement of lines E +- s = x over the rectangles band x [smin, smax]."""
    x = np.unique(S.breakpoints)
    u = np.array([b[0] for b in bands])
    v = np.array([b[1] for b in bands])
    last = (x.max() if x.size else u[-1]) + smax
    v = np.where(np.isinf(v), np.maximum(last, u), v)
    Es, Ss = [], []

    def add(E, s):
        E, s = np.broadcast_arrays(np.asarray(E, float), np.asarray(s, float))
        Es.append(E.reshape(-1))
        Ss.append(s.reshape(-1))

    # rectangle corners
    for s in (smin, smax):
        add(u, s)
        add(v, s)
    # lines meeting the horizontal edges s = smin, smax
    for s in (smin, smax):
        add(x - s, s)
        add(x + s, s)
    # lines meeting the vertical edges E = u, v
    for edge in (u, v):
        add(edge[:, None] + 0.0 * x[None, :], np.abs(x[None, :] - edge[:, None]))
    # crossings of E - s = x_i with E + s = x_j
    i, j = np.triu_indices(x.size, k=1)
    add(0.5 * (x[i] + x[j]), 0.5 * (x[j] - x[i]))
    # safety net: a coarse grid inside each band
    if grid:
        t = (np.arange(grid) + 0.5) / grid
        sg = np.geomspace(smin, smax, grid)
        inner = (u[:, None] + (v - u)[:, None] * t[None, :]).reshape(-1)
        add(inner[:, None] + 0.0 * sg[None, :], sg[None, :] + 0.0 * inner[:, None])
    E = np.concatenate(Es)
    s = np.concatenate(Ss)
    ok = (s >= smin) & (s <= smax) & np.isfinite(E)
    E, s = E[ok], s[ok]
    # keep only E inside some band (bands are closed)
    k = np.searchsorted(u, E, side="right") - 1
    ok = (k >= 0) & (E <= v[np.maximum(k, 0)])
    return E[ok], s[ok]


def certify(S: SpectrumSet, tau: float = 0.5, sigma_min: float = 1e-3, sigma_max: float = 10.0, *,
            outer: SpectrumSet | None = None, advisory: tuple[str, ...] = (), provenance: str = "",
            grid: int = 8) -> HomogeneityCertificate:
    """Certify |(E - s, E + s) n S| > tau s for all E in S, s in [sigma_min, sigma_max].

    ``S`` gives the lower bounds (its tail allowance is charged to every
    window). ``outer``, a superset of the true spectrum, supplies test
    energies and upper bounds; it defaults to S itself. The minimum over the
    rectangle is computed exactly at the vertices of the breakpoint line
    arrangement. A failure is reported only with a witness (E, s), E in S,
    whose upper bound plus twice the tail allowance stays <= tau s, which
    rules out rescue by a nearby spectrum point. Otherwise the result is
    inconclusive and CertificationInconclusiveError is raised.
    """
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    outer = S if outer is None else outer
    T = S.tail_allowance
    E, s = _candidates(S, outer.bands(), sigma_min, sigma_max, grid)
    upper = outer.measure(E - s, E + s)
    lower = np.maximum(S.measure(E - s, E + s) - T, 0.0)
    ratio = lower / s
    i = int(np.argmin(ratio))
    min_ratio = float(ratio[i])
    budget = float((upper[i] - lower[i]) / s[i])
    notes = tuple(advisory)
    if min_ratio > tau:
        verdict, witness = ("advisory" if notes else "pass"), None
    else:
        # witness search over test points that lie in the inner set
        Ew, sw = _candidates(outer, S.bands(), sigma_min, sigma_max, grid)
        up_w = outer.measure(Ew - sw, Ew + sw) + 2.0 * T
        bad = np.flatnonzero(up_w <= tau * sw)
        if not bad.size:
            raise CertificationInconclusiveError(
                f"min certified ratio {min_ratio!r} <= tau = {tau!r} but no failure witness: "
                f"error budget {budget!r} too large at E = {float(E[i])!r}, sigma = {float(s[i])!r}")
        w = bad[np.argmin(up_w[bad] / sw[bad])]
        verdict, witness = ("advisory" if notes else "fail"), (float(Ew[w]), float(sw[w]))
    return HomogeneityCertificate(verdict, tau, (sigma_min, sigma_max), int(E.size), min_ratio,
                                  (float(E[i]), float(s[i])), budget, witness, provenance, notes)


def certify_catalog(cat: GapCatalog, tau: float = 0.5, sigma_min: float = 1e-3,
                    sigma_max: float = 10.0, grid: int = 8) -> HomogeneityCertificate:
    notes = list(cat.defects())
    if cat.tie:
        notes.append("tie in resonance ordering upstream")
    return certify(SpectrumSet.from_catalog(cat, widen=True), tau, sigma_min, sigma_max,
                   outer=SpectrumSet.from_catalog(cat, widen=False), advisory=tuple(notes),
                   provenance=catalog_digest(cat), grid=grid)


# -- replay of the two-branch argument ---------------------------------------

def _window_tail(eps: float, kappa0: float, nu: int, R: int) -> float:
    """Upper bound on 2 eps sum_{|m|_1 >= R} exp(-kappa0 |m|_1 / 2)."""
    return 0.0 if eps == 0 else 2.0 * eps * exp_shell_tail(nu, kappa0 / 2.0, R)


def small_sigma_threshold(eps: float, kappa0: float, nu: int, a: float, b: float,
                          budget: int = 1_000_000) -> tuple[float, int]:
    """Largest sigma_0 with 2 eps sum_{|m| >= ceil(alpha s^-beta)} exp(-kappa0|m|/2) < s/2 for all s <= sigma_0.

    The left side is constant while R = ceil(alpha s^-beta) is fixed, and on
    that step s >= (alpha/R)^b, so the condition for the whole step is
    tail(R) < (alpha/R)^b / 2. Once tail(R+1)/tail(R) <= (R/(R+1))^b is
    guaranteed by the shell-ratio bound, the condition propagates to all
    larger R. Returns (sigma_0, R*) where R* is the first step of the run of
    valid steps reaching infinity; sigma_0 = inf when R* = 1.
    """
    if a <= 0 or b <= 0:
        raise ValueError("need a > 0 and b > 0")
    alpha = (a / 2.0) ** (1.0 / b)

    def ok(R: int) -> bool:
        return _window_tail(eps, kappa0, nu, R) < (alpha / R) ** b / 2.0

    if eps == 0:
        return math.inf, 1
    x = math.exp(-kappa0 / 2.0)
    R = max(nu, 1)
    while x * shell_ratio_bound(nu, R) > (R / (R + 1.0)) ** b:
        R += 1
        if R > budget:
            raise ConstantsTooWeakError(f"tail never decays faster than (alpha/R)^b below R = {budget}")
    while not ok(R):
        R += 1
        if R > budget:
            raise ConstantsTooWeakError(f"no valid step R <= {budget} for a = {a!r}, b = {b!r}")
    while R > 1 and ok(R - 1):
        R -= 1
    if R == 1:
        return math.inf, 1
    # step below the boundary until R re-evaluated in floating point lands on R*
    sigma0 = math.nextafter((alpha / (R - 1)) ** b, 0.0)
    while math.ceil(alpha * sigma0 ** (-1.0 / b)) < R:
        sigma0 = math.nextafter(sigma0, 0.0)
    return sigma0, R


def proof_replay(cat: GapCatalog, a: float | None, b: float) -> CheckReport:
    """Two-branch homogeneity argument with explicit constants.

    Small windows (s <= sigma_0): every gap meeting the window has a label
    with |m| >= alpha s^-beta, alpha = (a/2)^(1/b), beta = 1/b, and their
    total length stays below s/2. Large windows: all gaps together are
    shorter than sigma_0/2. Both branches give tau = 1/2.
    ``a=None`` uses the largest constant both separation checks support.
    """
    gsep = verify_gap_separation(cat, a, b)
    bsep = verify_bottom_separation(cat, a, b)
    if a is None:
        a = min(gsep.values["a_star"], bsep.values["a_star"])
        gsep = verify_gap_separation(cat, a, b)
        bsep = verify_bottom_separation(cat, a, b)
    findings = []
    if not (gsep.passed and bsep.passed):
        findings.append("separation constants not supported by the catalog")
    if not a > 0 or not math.isfinite(a):
        raise ConstantsTooWeakError(f"separation constant a = {a!r} is not a positive number")
    sigma0, R = small_sigma_threshold(cat.eps, cat.kappa0, cat.nu, a, b)
    alpha, beta = (a / 2.0) ** (1.0 / b), 1.0 / b
    small_margin = (alpha / R) ** b / 2.0 - _window_tail(cat.eps, cat.kappa0, cat.nu, R)
    total = cat.total_length + cat.tail_bound
    large_margin = math.inf if math.isinf(sigma0) else sigma0 / 2.0 - total
    if not large_margin > 0:
        findings.append(f"large-window branch fails: total gap length {total!r} >= sigma_0/2")
    passed = not findings
    return CheckReport(
        "proof_replay", passed, min(small_margin, large_margin),
        "large" if large_margin < small_margin else "small", findings,
        {"a": a, "b": b, "alpha": alpha, "beta": beta, "R_star": R, "sigma0": sigma0,
         "small_margin": small_margin, "large_margin": large_margin, "total_length": total,
         "tau": 0.5 if passed else 0.0},
    )
