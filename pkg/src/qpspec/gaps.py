"""Labeled gap catalogs and the quantitative checks on gap lengths and positions.

A gap label is a nonzero lattice point m; m and -m open the same gap, so a
catalog lists the representatives with m . omega > 0 only.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dispersion import DEFAULT_DIMENSION_CAP, dispersion_at, gap_edges
from .errors import QPSpecError
from .lattice import canonical_labels, exp_shell_tail, l1
from .potential import FourierPotential, Point
from .report import CheckReport


@dataclass(frozen=True)
class Gap:
    m: Point
    e_minus: float
    e_plus: float
    err: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        if not self.e_minus <= self.e_plus:
            raise ValueError(f"gap {self.m}: e_minus {self.e_minus!r} > e_plus {self.e_plus!r}")
        if not self.err >= 0:
            raise ValueError(f"gap {self.m}: negative error bound")

    @property
    def width(self) -> float:
        return self.e_plus - self.e_minus

    @property
    def closed(self) -> bool:
        return self.e_plus == self.e_minus

    @property
    def norm(self) -> int:
        return l1(self.m)


@dataclass(frozen=True)
class GapCatalog:
    """Spectrum data [bottom, inf) minus the listed gaps, plus a bound on everything unlisted.

    ``unresolved`` holds labels whose edges could not be computed (with the
    reason); any entry voids downstream certificates.
    """

    bottom: float
    gaps: tuple[Gap, ...]
    M: int
    tail_bound: float
    eps: float
    kappa0: float
    nu: int
    bottom_err: float = 0.0
    unresolved: tuple[tuple[Point, str], ...] = ()
    tie: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gaps = tuple(sorted(self.gaps, key=lambda g: (g.norm, g.m)))
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "unresolved", tuple((tuple(m), str(r)) for m, r in self.unresolved))
        object.__setattr__(self, "_index", {g.m: g for g in gaps})

    def __getitem__(self, m) -> Gap:
        return self._index[tuple(int(v) for v in np.atleast_1d(m))]

    def __len__(self):
        return len(self.gaps)

    @property
    def total_length(self) -> float:
        return math.fsum(g.width for g in self.gaps)

    def overlaps(self) -> list[tuple[Point, Point]]:
        """Pairs of open gaps that intersect by more than their combined error."""
        open_gaps = sorted((g for g in self.gaps if not g.closed), key=lambda g: (g.e_minus, g.m))
        out = []
        for i, g in enumerate(open_gaps):
            for h in open_gaps[i + 1:]:
                if h.e_minus >= g.e_plus:
                    break
                if min(g.e_plus, h.e_plus) - h.e_minus > g.err + h.err:
                    out.append((g.m, h.m))
        return out

    def defects(self) -> list[str]:
        """Reasons the catalog cannot back a certificate; empty when sound."""
        out = [f"unresolved label {m}: {why}" for m, why in self.unresolved]
        out += [f"gaps {a} and {b} overlap" for a, b in self.overlaps()]
        for g in self.gaps:
            if not g.closed and g.e_minus + g.err + self.bottom_err <= self.bottom:
                out.append(f"gap {g.m} does not lie above the bottom {self.bottom!r}")
        return out


def tail_bound(eps: float, kappa0: float, nu: int, M: int) -> float:
    """Proven upper bound on 2 eps sum_{|m|_1 > M} exp(-kappa0 |m|_1 / 2)."""
    if M < 0:
        raise ValueError("M must be >= 0")
    if eps == 0:
        return 0.0
    return 2.0 * eps * exp_shell_tail(nu, kappa0 / 2.0, M + 1)


def total_length_constant(kappa0: float, nu: int) -> float:
    """C(kappa0, nu) with sum of all gap lengths <= C eps (the M = 0 tail sum per unit eps)."""
    return tail_bound(1.0, kappa0, nu, 0)


def _edges_or_reason(p: FourierPotential, m: Point, N: int, cap: int):
    try:
        return gap_edges(p, m, N, cap=cap)
    except QPSpecError as exc:
        return f"{type(exc).__name__}: {exc}"


def build_catalog(p: FourierPotential, M: int, N: int | None = None, threads: int = 1,
                  cap: int = DEFAULT_DIMENSION_CAP) -> GapCatalog:
    """Gap edges for every label 0 < |m|_1 <= M, the spectrum bottom E(0) and the tail bound.

    Labels are processed in parallel on ``threads`` workers; results are
    collected in label order, so the catalog does not depend on the thread count.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    N = M + 2 if N is None else N
    if N < M + 2:
        raise ValueError(f"Galerkin box N = {N} must satisfy N >= M + 2 = {M + 2}")
    labels = [tuple(int(v) for v in m) for m in canonical_labels(p.freq.array, M)]
    ground = dispersion_at(p, 0.0, N, cap=cap)

    def work(m):
        return _edges_or_reason(p, m, N, cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, labels))
    else:
        results = [work(m) for m in labels]

    gaps, unresolved, tie = [], [], False
    for m, res in zip(labels, results):
        if isinstance(res, str):
            unresolved.append((m, res))
            continue
        tie = tie or res.tie
        gaps.append(Gap(m, res.e_minus, res.e_plus, res.err))
    return GapCatalog(
        bottom=ground.E, gaps=tuple(gaps), M=M, tail_bound=tail_bound(p.eps, p.kappa0, p.nu, M),
        eps=p.eps, kappa0=p.kappa0, nu=p.nu, bottom_err=ground.trunc_error,
        unresolved=tuple(unresolved), tie=tie,
    )


def _require_resolved(cat: GapCatalog):
    if cat.unresolved:
        raise ValueError(f"catalog has {len(cat.unresolved)} unresolved labels, e.g. {cat.unresolved[0][0]}")


def verify_gap_decay(cat: GapCatalog) -> CheckReport:
    """width(m) <= 2 eps exp(-kappa0 |m|_1 / 2) + 2 err for every gap."""
    _require_resolved(cat)
    worst, offender, findings = math.inf, None, []
    for g in cat.gaps:
        if g.closed:
            continue
        bound = 2.0 * cat.eps * math.exp(-cat.kappa0 * g.norm / 2.0)
        margin = bound + 2.0 * g.err - g.width
        if margin < worst:
            worst, offender = margin, g.m
        if margin < 0:
            findings.append(f"gap {g.m}: width {g.width!r} exceeds {bound!r} + 2*{g.err!r}")
    return CheckReport("gap_decay", not findings, worst, offender, findings,
                       {"gaps": len(cat.gaps), "open": sum(not g.closed for g in cat.gaps)})


def _interval_distance(g: Gap, h: Gap) -> float:
    return max(0.0, max(g.e_minus, h.e_minus) - min(g.e_plus, h.e_plus))


def verify_gap_separation(cat: GapCatalog, a: float | None = None, b: float = 8.0) -> CheckReport:
    """dist(G_m, G_m') >= a |m'|^-b - 2 err for m != m', |m'|_1 >= |m|_1.

    ``a_star`` (reported) is the largest a the catalog supports for this b;
    with ``a=None`` the check runs at a_star itself.
    """
    _require_resolved(cat)
    if b <= 0 or (a is not None and a <= 0):
        raise ValueError("need a > 0 and b > 0")
    pairs = []
    gaps = cat.gaps
    for i, g in enumerate(gaps):
        for h in gaps[i + 1:]:
            big = max(g.norm, h.norm)
            pairs.append((_interval_distance(g, h), big, g.err + h.err, (g.m, h.m)))
    a_star = min((d * float(n) ** b for d, n, _, _ in pairs), default=math.inf)
    a_used = a_star if a is None else a
    worst, offender, findings = math.inf, None, []
    if a_used > 0:
        for d, n, err, ms in pairs:
            margin = d - (a_used * float(n) ** -b - 2.0 * err)
            if margin < worst:
                worst, offender = margin, ms
            if margin < 0:
                findings.append(f"gaps {ms[0]} and {ms[1]}: distance {d!r} below {a_used!r} * {n}^-{b}")
    else:
        findings.append("no positive separation constant: some gaps touch")
        worst = 0.0
    return CheckReport("gap_separation", not findings, worst, offender, findings,
                       {"a": a_used, "b": b, "a_star": a_star, "pairs": len(pairs)})


def verify_bottom_separation(cat: GapCatalog, a: float | None = None, b: float = 8.0) -> CheckReport:
    """E^-_m - bottom >= a |m|^-b - 2 err for every gap; a=None checks at the fitted a_star."""
    _require_resolved(cat)
    if b <= 0 or (a is not None and a <= 0):
        raise ValueError("need a > 0 and b > 0")
    rows = [(g.e_minus - cat.bottom, g.norm, g.err + cat.bottom_err, g.m) for g in cat.gaps]
    a_star = min((d * float(n) ** b for d, n, _, _ in rows), default=math.inf)
    a_used = a_star if a is None else a
    worst, offender, findings = math.inf, None, []
    if a_used > 0:
        for d, n, err, m in rows:
            margin = d - (a_used * float(n) ** -b - 2.0 * err)
            if margin < worst:
                worst, offender = margin, m
            if margin < 0:
                findings.append(f"gap {m}: E^- - bottom = {d!r} below {a_used!r} * {n}^-{b}")
    else:
        findings.append("a gap starts at or below the spectrum bottom")
        worst = 0.0
    return CheckReport("bottom_separation", not findings, worst, offender, findings,
                       {"a": a_used, "b": b, "a_star": a_star, "bottom": cat.bottom})


def inverse_coefficient_check(p: FourierPotential, cat: GapCatalog, kappa: float) -> CheckReport:
    """Inverse direction: gaps decaying like eps' exp(-kappa |m|) force |c(m)| <= sqrt(eps') exp(-kappa |m| / 2).

    eps' is fitted as the least value the catalog allows. The implication is
    only claimed for eps' below an unquantified threshold, so a pass here is
    evidence, and a failure for large eps' is not a contradiction.
    """
    if not kappa > 4.0 * p.kappa0:
        raise ValueError(f"need kappa > 4 kappa0 = {4.0 * p.kappa0!r}, got {kappa!r}")
    _require_resolved(cat)
    eps_fit, fit_label = 0.0, None
    for g in cat.gaps:
        val = g.width * math.exp(kappa * g.norm)
        if val > eps_fit:
            eps_fit, fit_label = val, g.m
    worst, offender, findings = math.inf, None, []
    for n, c in sorted(p.coeffs.items()):
        if l1(n) > cat.M:
            continue  # no gap data for this label
        bound = math.sqrt(eps_fit) * math.exp(-kappa * l1(n) / 2.0)
        margin = bound - abs(c)
        if margin < worst:
            worst, offender = margin, n
        if margin < 0:
            findings.append(f"c{n}: |c| = {abs(c)!r} exceeds {bound!r}")
    return CheckReport("inverse_coefficients", not findings, worst, offender, findings,
                       {"kappa": kappa, "eps_fit": eps_fit, "fit_label": fit_label})


def verify_total_length(cat: GapCatalog) -> CheckReport:
    """sum of listed widths + tail_bound <= C(kappa0, nu) eps."""
    C = total_length_constant(cat.kappa0, cat.nu)
    lhs = cat.total_length + cat.tail_bound
    rhs = C * cat.eps
    margin = rhs - lhs
    findings = [] if margin >= 0 else [f"total length {lhs!r} exceeds C eps = {rhs!r}"]
    return CheckReport("total_length", margin >= 0, margin, None, findings,
                       {"C": C, "total": cat.total_length, "tail_bound": cat.tail_bound})


# -- persistence -------------------------------------------------------------

def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(x))


def catalog_to_csv(cat: GapCatalog) -> str:
    """CSV text: '#' preamble with catalog-level data, header, one row per gap (LF endings)."""
    lines = [
        f"# bottom = {_fmt(cat.bottom)}",
        f"# bottom_err = {_fmt(cat.bottom_err)}",
        f"# tail_bound = {_fmt(cat.tail_bound)}",
        f"# M = {cat.M}",
        f"# eps = {_fmt(cat.eps)}",
        f"# kappa0 = {_fmt(cat.kappa0)}",
        f"# nu = {cat.nu}",
        f"# tie = {int(cat.tie)}",
    ]
    for m, why in cat.unresolved:
        lines.append(f"# unresolved = {' '.join(map(str, m))} | {why}")
    lines.append(",".join([f"m{i + 1}" for i in range(cat.nu)] + ["e_minus", "e_plus", "err"]))
    for g in cat.gaps:
        lines.append(",".join([str(v) for v in g.m] + [_fmt(g.e_minus), _fmt(g.e_plus), _fmt(g.err)]))
    return "\n".join(lines) + "\n"


def catalog_from_csv(text: str) -> GapCatalog:
    meta: dict[str, str] = {}
    unresolved = []
    rows = []
    header = None
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].partition("=")
            key, value = key.strip(), value.strip()
            if key == "unresolved":
                pts, _, why = value.partition("|")
                unresolved.append((tuple(int(v) for v in pts.split()), why.strip()))
            else:
                meta[key] = value
            continue
        if header is None:
            header = raw.split(",")
            continue
        rows.append(raw.split(","))
    try:
        nu = int(meta["nu"])
        if header is None or len(header) != nu + 3:
            raise ValueError("header does not match nu")
        gaps = tuple(Gap(tuple(int(v) for v in r[:nu]), float(r[nu]), float(r[nu + 1]), float(r[nu + 2]))
                     for r in rows)
        return GapCatalog(
            bottom=float(meta["bottom"]), gaps=gaps, M=int(meta["M"]),
            tail_bound=float(meta["tail_bound"]), eps=float(meta["eps"]),
            kappa0=float(meta["kappa0"]), nu=nu, bottom_err=float(meta["bottom_err"]),
            unresolved=tuple(unresolved), tie=bool(int(meta.get("tie", "0"))),
        )
    except (KeyError, IndexError) as exc:
        raise ValueError(f"malformed catalog CSV: missing {exc}") from exc


def catalog_digest(cat: GapCatalog) -> str:
    return hashlib.sha256(catalog_to_csv(cat).encode()).hexdigest()
