"""Acceptance criteria, one test per item; each records a PASS/FAIL line printed after the run."""

from __future__ import annotations

import math
import time

import numpy as np

from conftest import ACCEPTANCE, golden_potential, zero_potential
from qpspec.cli import parse_config, run
from qpspec.dispersion import check_decay_envelope, dispersion_at, verify_dispersion_bounds
from qpspec.errors import CertificationInconclusiveError
from qpspec.gaps import build_catalog, verify_gap_decay
from qpspec.homogeneity import SpectrumSet, certify_catalog, intersect_measure, proof_replay
from qpspec.oracle import gap_label_check
from qpspec.potential import cosine_potential
from qpspec.resonance import resonant_indices


def record(key: str, ok: bool, detail: str):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, detail


def clipped_measure(lo, hi, bottom, a, b):
    """Window measure from the gap list alone: clip every gap, subtract from the clipped window."""
    start = max(a, bottom)
    if b <= start:
        return 0.0
    return (b - start) - math.fsum(max(0.0, min(b, g1) - max(start, g0)) for g0, g1 in zip(lo, hi))


def golden_config_text(M=4, N=8, threads=2) -> str:
    p = golden_potential()
    lines = ["nu = 2", "omega = 1.0 1.4142135623730951", "a0 = 0.5", "b0 = 2.5", f"eps = {p.eps!r}",
             f"kappa0 = {p.kappa0!r}", f"M = {M}", f"N = {N}", f"threads = {threads}"]
    lines += [f"coeff {n[0]} {n[1]} {c.real!r} {c.imag!r}" for n, c in sorted(p.coeffs.items())]
    return "\n".join(lines) + "\n"


# 1 ---------------------------------------------------------------------------------

def test_criterion_1_free_operator_exactness():
    t0 = time.perf_counter()
    z = zero_potential()
    ks = np.linspace(-1.95, 1.95, 100)
    err = max(abs(dispersion_at(z, float(k), 6).E - float(k) ** 2) for k in ks)
    cat = build_catalog(z, 4, 6)
    closed = all(g.closed for g in cat.gaps)
    cert = certify_catalog(cat, 0.5, 1e-3, 10.0)
    elapsed = time.perf_counter() - t0
    at_bottom = cert.argmin[0] == cat.bottom
    ok = err < 1e-12 and closed and cert.min_ratio == 1.0 and at_bottom and elapsed < 1.0
    worst_err = max(g.err for g in cat.gaps)
    record("1", ok, f"max|E-k^2| = {err:.3g}, gaps closed = {closed} (max err {worst_err:.3g}), "
                    f"min_ratio = {cert.min_ratio!r} (certified interval up to "
                    f"{cert.min_ratio + cert.error_budget!r}) at E = {cert.argmin[0]!r}, {elapsed:.2f}s")


# 2 ---------------------------------------------------------------------------------

def two_by_two_width(g: float) -> float:
    """Degenerate pair n = 0, n = -1 at k = 1/2: H = [[1/4, g], [g, 1/4]]."""
    w = np.linalg.eigvalsh(np.array([[0.25, g], [g, 0.25]]))
    return float(w[1] - w[0])


def test_criterion_2_perturbative_gap_width():
    t0 = time.perf_counter()
    rows, ok = [], True
    for g in (1e-3, 1e-4):
        width = build_catalog(cosine_potential(g), 3, 5)[(1,)].width
        oracle = two_by_two_width(g)
        dev = abs(width - 2 * g)
        ok &= dev <= 10 * g * g and abs(oracle - 2 * g) <= 10 * g * g
        rows.append(f"g={g:g}: width={width:.10g} 2x2={oracle:.10g} |w-2g|={dev:.2g}<={10 * g * g:.2g}")
    elapsed = time.perf_counter() - t0
    record("2", ok and elapsed < 10, "; ".join(rows) + f", {elapsed:.2f}s")


# 3 ---------------------------------------------------------------------------------

def test_criterion_3_gap_decay():
    t0 = time.perf_counter()
    cat = build_catalog(golden_potential(), 4, 8)
    rep = verify_gap_decay(cat)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and not cat.unresolved and elapsed < 300
    record("3", ok, f"{len(cat.gaps)} gaps, {sum(not g.closed for g in cat.gaps)} open, worst margin "
                    f"{rep.worst_margin:.3g} at {rep.offender}, {elapsed:.1f}s")


# 4 ---------------------------------------------------------------------------------

def test_criterion_4_eigenvector_envelope(golden):
    ks = 0.05 + 0.1 * np.arange(20)
    assert all(len(resonant_indices(float(k), golden.freq, 8)) == 0 for k in ks)
    bad = []
    for k in ks:
        rep = check_decay_envelope(golden, dispersion_at(golden, float(k), 8))
        if not rep.passed:
            bad.append(f"k={k:.2f} at n={rep.offender} margin {rep.worst_margin:.3g}")
    record("4", not bad, f"{20 - len(bad)}/20 nonresonant k within envelope" + ("; " + "; ".join(bad) if bad else ""))


# 5 ---------------------------------------------------------------------------------

def test_criterion_5_dispersion_bounds(golden):
    rng = np.random.default_rng(5)
    reps = []
    while len(reps) < 50:
        k1 = float(rng.uniform(0.01, 1.9))
        k = k1 + float(rng.uniform(0.01, 0.24))
        if len(resonant_indices(k1, golden.freq, 8)) or len(resonant_indices(k, golden.freq, 8)):
            continue
        reps.append(verify_dispersion_bounds(golden, k1, k, eps0=1e-2, N=8))
    failed = [r for r in reps if not r.passed]
    worst = min(reps, key=lambda r: r.worst_margin)
    record("5", not failed, f"{50 - len(failed)}/50 pairs, worst margin {worst.worst_margin:.3g} "
                            f"({worst.offender}) at k1={worst.values['k1']:.4f}, k={worst.values['k']:.4f}")


# 6 ---------------------------------------------------------------------------------

def test_criterion_6_1_certify_item_3_catalog(golden_catalog):
    try:
        cert = certify_catalog(golden_catalog, 0.5, 1e-3, 10.0)
        ok, detail = cert.verdict == "pass", cert.summary()
    except CertificationInconclusiveError as exc:
        ok, detail = False, f"INCONCLUSIVE with M = 4: tail bound {golden_catalog.tail_bound:.3g} > sigma_min; {exc}"
    record("6.1", ok, detail)


def test_criterion_6_2_certify_deeper_catalog(certification_catalog):
    cert = certify_catalog(certification_catalog, 0.5, 1e-3, 10.0)
    record("6.2", cert.verdict == "pass",
           f"M = 12: {cert.summary()} at E={cert.argmin[0]:.4g}, sigma={cert.argmin[1]:.4g}, "
           f"{cert.tested_points} test points")


def test_criterion_6_3_measure_oracle(certification_catalog):
    rng = np.random.default_rng(6)
    worst, count = 0.0, 0
    for S in (SpectrumSet.from_catalog(certification_catalog, widen=True),
              SpectrumSet.from_catalog(certification_catalog, widen=False)):
        top = float(S.breakpoints.max())
        E = rng.uniform(S.bottom, top + 1.0, 4000)
        E = E[S.contains(E)][:500]
        sig = np.exp(rng.uniform(math.log(1e-3), math.log(10.0), E.size))
        for e, s in zip(E, sig):
            got = intersect_measure(S, float(e), float(s))[1]
            want = clipped_measure(S.lo, S.hi, S.bottom, float(e - s), float(e + s))
            worst = max(worst, abs(got - want))
            count += 1
    record("6.3", worst <= 1e-9 and count == 1000, f"{count} (E, sigma) on inner and outer sets, max deviation {worst:.3g}")


def test_criterion_6_4_replay_sigma0_positive(certification_catalog):
    rep = proof_replay(certification_catalog, None, 10.0)
    v = rep.values
    record("6.4", v["sigma0"] > 0, f"a = {v['a']:.4g}, b = {v['b']!r}, R* = {v['R_star']}, sigma0 = {v['sigma0']:.3g}")


def test_criterion_6_5_replay_closes_small_windows(certification_catalog):
    rep = proof_replay(certification_catalog, None, 10.0)
    v = rep.values
    ok = v["sigma0"] >= 1e-3 and rep.passed
    record("6.5", ok, f"sigma0 = {v['sigma0']:.3g} vs sigma_min = 1e-3; large-window margin "
                      f"{v['large_margin']:.3g} (total length {v['total_length']:.3g})")


# 7 ---------------------------------------------------------------------------------

def test_criterion_7_oracle_consistency(periodic, periodic_catalog):
    t0 = time.perf_counter()
    rep = gap_label_check(periodic_catalog, periodic, L=2000.0, h=0.02)
    elapsed = time.perf_counter() - t0
    rows = [rep.values[f"(1,) {bc}"] for bc in ("dirichlet", "neumann")]
    ok = rep.passed and rep.values["selected"] >= 1 and elapsed < 120
    record("7", ok, f"m=1: {rows[0]}; worst margin {rep.worst_margin:.3g}, {elapsed:.1f}s")


# 8 ---------------------------------------------------------------------------------

def random_family(rng, dyadic=False):
    n = int(rng.integers(0, 9))
    if dyadic:
        bottom = int(rng.integers(-8, 9)) / 4
        cuts = bottom + np.cumsum(rng.integers(1, 65, 2 * n)) / 64
    else:
        bottom = float(rng.uniform(-2, 2))
        cuts = bottom + np.cumsum(rng.uniform(1e-3, 1.0, 2 * n))
    return bottom, [(float(cuts[2 * i]), float(cuts[2 * i + 1])) for i in range(n)]


def fine_grid_measure(bottom, gaps, a, b, n=20001):
    """Midpoint rule on the indicator of the set; error at most one cell per breakpoint."""
    h = (b - a) / n
    x = a + h * (np.arange(n) + 0.5)
    inside = x >= bottom
    for g0, g1 in gaps:
        inside &= ~((x > g0) & (x < g1))
    return float(inside.sum()) * h, h


def test_criterion_8_measure_engine():
    rng = np.random.default_rng(8)
    worst_grid = 0.0
    for _ in range(1000):
        bottom, gaps = random_family(rng)
        S = SpectrumSet.from_gaps(bottom, gaps)
        E, s = float(rng.uniform(bottom - 1, bottom + 6)), float(np.exp(rng.uniform(-5, 1.5)))
        got = intersect_measure(S, E, s)[1]
        ref, h = fine_grid_measure(bottom, gaps, E - s, E + s)
        allowance = (2 * len(gaps) + 1) * h
        worst_grid = max(worst_grid, abs(got - ref) / allowance)
    additive = scaling = 0
    for _ in range(1000):
        bottom, gaps = random_family(rng, dyadic=True)
        S = SpectrumSet.from_gaps(bottom, gaps)
        a = int(rng.integers(-64, 1024))
        x0 = a / 64
        x1 = x0 + int(rng.integers(1, 257)) / 64
        x2 = x1 + int(rng.integers(1, 257)) / 64
        additive += float(S.measure(x0, x1)) + float(S.measure(x1, x2)) != float(S.measure(x0, x2))
        lam = 2.0 ** int(rng.integers(-6, 7))
        T = SpectrumSet.from_gaps(lam * bottom, [(lam * g0, lam * g1) for g0, g1 in gaps])
        E, s = x0, (x1 - x0)
        scaling += intersect_measure(T, lam * E, lam * s)[1] != lam * intersect_measure(S, E, s)[1]
    ok = worst_grid <= 1.0 and additive == 0 and scaling == 0
    record("8", ok, f"grid deviation {worst_grid:.3g} of resolution allowance over 1000 families; "
                    f"additivity violations {additive}, scaling violations {scaling} (1000 dyadic families)")


# 9 ---------------------------------------------------------------------------------

ITEM_CONFIGS = {
    "item1": ("nu = 1\nomega = 1.0\na0 = 0.5\nb0 = 2.0\neps = 0.0\nkappa0 = 1.0\nM = 4\nthreads = 2\n",
              ("dispersion", "gaps", "certify")),
    "item2": ("nu = 1\nomega = 1.0\na0 = 0.5\nb0 = 2.0\neps = 0.0028\nkappa0 = 1.0\nM = 3\nthreads = 2\n"
              "coeff 1 0.001 0.0\ncoeff -1 0.001 0.0\n", ("dispersion", "gaps")),
    "item3": (None, ("gaps",)),
}


def test_criterion_9_determinism(tmp_path):
    differing, files = [], 0
    for item, (text, commands) in ITEM_CONFIGS.items():
        cfg = parse_config(text if text is not None else golden_config_text())
        for command in commands:
            codes = [run(command, cfg, tmp_path / item / command / rep, kmin=0.05, kmax=1.95, nk=39)
                     for rep in ("a", "b")]
            a, b = (tmp_path / item / command / rep for rep in ("a", "b"))
            names = sorted(p.name for p in a.iterdir())
            assert names == sorted(p.name for p in b.iterdir())
            for name in names:
                files += 1
                if (a / name).read_bytes() != (b / name).read_bytes():
                    differing.append(f"{item}/{command}/{name}")
            if codes[0] != codes[1]:
                differing.append(f"{item}/{command} exit code")
    record("9", not differing, f"{files} artifacts compared at threads = 2"
                               + (f", differing: {', '.join(differing)}" if differing else ", all identical"))
