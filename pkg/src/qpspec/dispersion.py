"""Floquet parametrization E(k), phi(.;k) by Galerkin truncation in the Fourier basis.

Substituting psi(x) = sum_n phi(n) exp(i x (n.omega + k)) into
-psi'' + V psi = E psi gives the Hermitian matrix

    H(k)[n, n'] = (n.omega + k)**2 [n == n'] + c(n - n')

indexed by the l1 box |n|_1 <= N. Row 0 is always the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import (AmbiguousSelectionError, ClusterOverlapError, DimensionCapError,
                     GapResolutionError, NonConvergenceError)
from .lattice import box_size, l1, lattice_box
from .potential import FourierPotential, Point, eval_potential
from .report import CheckReport
from .resonance import cluster_or_origin, delta, k_point, resonance_points_between, resonant_indices

DEFAULT_DIMENSION_CAP = 20_000
AMBIGUITY_THRESHOLD = 1e-3
# eigenvectors with |v(0)| >= this lie within abs_sum / _MIN_WEIGHT of k^2
_MIN_WEIGHT = 0.1
RICHARDSON_DEPTH = 5


@dataclass(frozen=True)
class GalerkinOperator:
    k: float
    N: int
    points: np.ndarray
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return self.points.shape[0]


@lru_cache(maxsize=8)
def _difference_keys(nu: int, N: int) -> np.ndarray:
    pts = lattice_box(nu, N)
    base = 4 * N + 1
    weights = base ** np.arange(nu, dtype=np.int64)
    enc = (pts + 2 * N) @ weights
    origin = (2 * N) * weights.sum()
    keys = enc[:, None] - enc[None, :] + origin
    keys.setflags(write=False)
    return keys


def _coefficient_table(p: FourierPotential, N: int) -> np.ndarray:
    base = 4 * N + 1
    table = np.zeros(base ** p.nu, dtype=complex)
    weights = base ** np.arange(p.nu, dtype=np.int64)
    for n, c in p.coeffs.items():
        if l1(n) <= 2 * N and any(n):
            table[int(np.dot(np.asarray(n) + 2 * N, weights))] = c
    return table


def build_matrix(p: FourierPotential, k: float, N: int,
                 cap: int = DEFAULT_DIMENSION_CAP) -> GalerkinOperator:
    if N < 1:
        raise ValueError("box radius must be >= 1")
    dim = box_size(p.nu, N)
    if dim > cap:
        raise DimensionCapError(f"box |n|_1 <= {N} in Z^{p.nu} has {dim} points, cap is {cap}")
    pts = lattice_box(p.nu, N)
    mat = _coefficient_table(p, N)[_difference_keys(p.nu, N)]
    diag = (pts @ p.freq.array + k) ** 2
    mat[np.diag_indices(dim)] += diag
    return GalerkinOperator(float(k), int(N), pts, mat)


def eigensolve_hermitian(M: np.ndarray, window: tuple[float, float] | None = None):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    With ``window = (lo, hi)`` only eigenpairs with lo < lambda <= hi are
    returned. Every returned pair satisfies ||M v - lambda v|| <= 1e-10 ||M||.
    """
    M = np.asarray(M)
    scale = float(np.abs(M).sum(axis=1).max()) if M.size else 0.0
    if M.size and np.abs(M - M.conj().T).max() > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not Hermitian to 1e-12 relative tolerance")
    try:
        if window is None:
            w, V = scipy.linalg.eigh(M, driver="evd")
        else:
            w, V = scipy.linalg.eigh(M, subset_by_value=window, driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NonConvergenceError(f"Hermitian eigensolve failed: {exc}") from exc
    if w.size:
        resid = np.linalg.norm(M @ V - V * w, axis=0).max()
        if resid > 1e-10 * max(scale, 1.0):
            raise NonConvergenceError(f"eigenpair residual {resid:.3e} exceeds tolerance", resid)
    return w, V


@dataclass(frozen=True)
class DispersionSample:
    k: float
    E: float
    points: np.ndarray
    phi: np.ndarray  # phi[i] belongs to points[i]; phi[0] == 1
    trunc_error: float
    box: int

    def phi_at(self, n) -> complex:
        key = tuple(int(v) for v in n)
        if l1(key) > self.box:
            return 0j
        hits = np.flatnonzero((self.points == np.asarray(key)).all(axis=1))
        return complex(self.phi[hits[0]])


def _select_origin_branch(p: FourierPotential, k: float, N: int, cap: int, strict: bool):
    op = build_matrix(p, k, N, cap)
    half = p.abs_sum / _MIN_WEIGHT + 1e-8 * (1.0 + k * k)
    w, V = eigensolve_hermitian(op.matrix, (k * k - half, k * k + half))
    weights = np.abs(V[0, :]) if w.size else np.zeros(0)
    if not w.size or weights.max() < _MIN_WEIGHT + AMBIGUITY_THRESHOLD:
        w, V = eigensolve_hermitian(op.matrix)
        weights = np.abs(V[0, :])
    order = sorted(range(w.size), key=lambda i: (-weights[i], abs(w[i] - k * k)))
    i = order[0]
    if strict and w.size > 1 and weights[i] - weights[order[1]] < AMBIGUITY_THRESHOLD:
        raise AmbiguousSelectionError(k, (float(weights[i]), float(weights[order[1]])))
    return op, float(w[i]), V[:, i]


def branch_energy(p: FourierPotential, k: float, N: int, cap: int = DEFAULT_DIMENSION_CAP) -> float:
    """Eigenvalue whose eigenvector has the largest weight at the origin (no ambiguity check)."""
    return _select_origin_branch(p, k, N, cap, strict=False)[1]


def dispersion_at(p: FourierPotential, k: float, N: int, *, refine: bool = True,
                  cap: int = DEFAULT_DIMENSION_CAP) -> DispersionSample:
    """E(k) and phi(.;k) normalized to phi(0;k) = 1.

    trunc_error is |E_N - E_2N| from one solve on the doubled box
    (0.0 when ``refine`` is false).
    """
    op, E, v = _select_origin_branch(p, k, N, cap, strict=True)
    phi = v / v[0]
    phi[0] = 1.0
    trunc = 0.0
    if refine:
        _, E2, _ = _select_origin_branch(p, k, 2 * N, cap, strict=True)
        trunc = abs(E - E2)
    return DispersionSample(float(k), E, op.points, phi, trunc, int(N))


def _neville_at_zero(xs, ys) -> float:
    P = [float(y) for y in ys]
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            P[i] = (xs[j] * P[i] - xs[i] * P[i + 1]) / (xs[j] - xs[i])
    return P[0]


@dataclass(frozen=True)
class GapEdges:
    m: Point
    e_minus: float
    e_plus: float
    err: float
    closed: bool
    method1: tuple[float, float]
    method2: tuple[float, float]
    trunc_error: float
    tie: bool = False

    @property
    def width(self) -> float:
        return self.e_plus - self.e_minus


def _pair_edges(p: FourierPotential, k: float, m: Point, N: int, cap: int) -> tuple[float, float]:
    op = build_matrix(p, k, N, cap)
    idx = {tuple(int(v) for v in row): i for i, row in enumerate(op.points)}
    i0, im = idx[(0,) * p.nu], idx[m]
    half = 2.0 * p.abs_sum + 1e-8 * (1.0 + k * k)
    w, V = eigensolve_hermitian(op.matrix, (k * k - half, k * k + half))
    mass = np.abs(V[i0, :]) ** 2 + np.abs(V[im, :]) ** 2
    if w.size < 2:
        raise GapResolutionError(f"fewer than two eigenvalues near k_m^2 for m = {m}")
    top = np.argsort(-mass, kind="stable")[:2]
    if mass[top].min() < 0.9:
        raise GapResolutionError(
            f"m = {m}: eigenvectors carry only {mass[top].min():.3f} of their mass on {{0, m}}")
    lo, hi = sorted(float(x) for x in w[top])
    return lo, hi


def gap_edges(p: FourierPotential, m, N: int, *, cap: int = DEFAULT_DIMENSION_CAP) -> GapEdges:
    """Edges of the gap opened at k_m = -(m.omega)/2 by the pair of plane waves {0, m}.

    Method 1 diagonalizes H(k_m) and takes the two eigenvalues living on
    {0, m}. Method 2 extrapolates the origin branch to k_m from both sides
    (polynomial extrapolation on eta_j = eta_0 2^-j, j < 5). The returned
    edges are method 1; err covers box truncation and method disagreement.
    """
    m = tuple(int(v) for v in np.atleast_1d(m))
    f = p.freq
    k = k_point(m, f)
    if l1(m) > N:
        raise ValueError(f"label {m} lies outside the Galerkin box |n|_1 <= {N}")
    cl = cluster_or_origin(k, f, N)
    outside = [n for n in cl.cluster if l1(n) > N]
    if outside:
        raise ClusterOverlapError(f"resonance cluster at k_{m} has members outside the box: {outside[:4]}")

    lo, hi = _pair_edges(p, k, m, N, cap)
    lo2N, hi2N = _pair_edges(p, k, m, 2 * N, cap)
    trunc = max(abs(lo - lo2N), abs(hi - hi2N))

    speed = abs(f.dot(m))
    # stay inside the window of m and, for open gaps, inside the disc where the
    # two-level branch is analytic in eta (radius width / (2 |m.omega|))
    eta0 = min(delta(m, f) / 4.0, 1e-2, max((hi - lo) / (8.0 * speed), 1e-12 * max(1.0, abs(k))))
    sides = []
    for sign in (1.0, -1.0):
        ks = [k + sign * eta0 * 2.0 ** -j for j in range(RICHARDSON_DEPTH)]
        etas = [abs(kk - k) for kk in ks]  # exact offsets after rounding
        ys = [branch_energy(p, kk, N, cap) for kk in ks]
        sides.append(_neville_at_zero(etas, ys))
    lo_b, hi_b = sorted(sides)

    err = max(trunc, abs(lo - lo_b), abs(hi - hi_b))
    width = hi - lo
    closed = not width > max(1e-12, 10.0 * err)
    e_minus, e_plus = lo, hi
    if closed:
        mid = 0.5 * (lo + hi)
        # the true edges lie within err of lo and hi, which are w/2 from mid
        err = err + 0.5 * width
        e_minus = e_plus = mid
    return GapEdges(m, e_minus, e_plus, err, closed, (lo, hi), (lo_b, hi_b), trunc, cl.tie)


def verify_dispersion_bounds(p: FourierPotential, k1: float, k: float, eps0: float = 1e-2,
                             N: int = 8) -> CheckReport:
    """Two-sided increment bound for E between nonresonant k1 < k (k - k1 < 1/4, k1 > 0):

        (k0)^2 (k - k1)^2 < E(k) - E(k1) < 2 k (k - k1) + 2 eps sum_{k1 < k_n < k} delta(n)

    with k0 = min(eps0, k / 1024) and the sum over |n|_1 <= N.
    """
    if not (k1 > 0 and 0 < k - k1 < 0.25):
        raise ValueError(f"need k1 > 0 and 0 < k - k1 < 1/4, got k1 = {k1}, k = {k}")
    for kk in (k1, k):
        if len(resonant_indices(kk, p.freq, N)):
            raise ValueError(f"k = {kk} is resonant within |n|_1 <= {N}")
    s1 = dispersion_at(p, k1, N)
    s2 = dispersion_at(p, k, N)
    diff = s2.E - s1.E
    slack = s1.trunc_error + s2.trunc_error
    k0 = min(eps0, k / 1024.0)
    lower = k0 ** 2 * (k - k1) ** 2
    _, deltas = resonance_points_between(k1, k, p.freq, N)
    upper = 2.0 * k * (k - k1) + 2.0 * p.eps * math.fsum(deltas)
    lower_margin = diff + slack - lower
    upper_margin = upper - (diff - slack)
    passed = lower_margin > 0 and upper_margin > 0
    worst = min(lower_margin, upper_margin)
    findings = []
    if lower_margin <= 0:
        findings.append(f"lower bound fails: E(k)-E(k1) = {diff!r} <= {lower!r}")
    if upper_margin <= 0:
        findings.append(f"upper bound fails: E(k)-E(k1) = {diff!r} >= {upper!r}")
    return CheckReport(
        "dispersion_bounds", passed, worst,
        "lower" if lower_margin <= upper_margin else "upper", findings,
        {"k1": k1, "k": k, "eps0": eps0, "increment": diff, "lower": lower, "upper": upper,
         "lower_margin": lower_margin, "upper_margin": upper_margin, "resonances_crossed": len(deltas)},
    )


def _residual_coefficients(p: FourierPotential, s: DispersionSample) -> dict[Point, complex]:
    """Fourier coefficients r(n), n outside the box, of (-d^2 + V - E) psi."""
    out: dict[Point, complex] = {}
    for d, c in p.coeffs.items():
        d = np.asarray(d)
        for n, ph in zip(s.points, s.phi):
            t = tuple(int(v) for v in n + d)
            if l1(t) > s.box:
                out[t] = out.get(t, 0j) + c * ph
    return out


def floquet_residual(p: FourierPotential, s: DispersionSample, x_samples) -> float:
    """max over x of |-psi'' + V psi - E psi| for the truncated Floquet sum."""
    xs = np.atleast_1d(np.asarray(x_samples, dtype=float))
    freqs = s.points @ p.freq.array + s.k
    waves = np.exp(1j * np.multiply.outer(xs, freqs))
    psi = waves @ s.phi
    d2psi = waves @ (-(freqs ** 2) * s.phi)
    V = np.asarray(eval_potential(p, xs))
    return float(np.abs(-d2psi + V * psi - s.E * psi).max())


def floquet_residual_bound(p: FourierPotential, s: DispersionSample) -> float:
    """Bound on floquet_residual: escaped mass sum |r(n)| plus a rounding allowance."""
    escaped = math.fsum(abs(v) for v in _residual_coefficients(p, s).values())
    freqs = s.points @ p.freq.array + s.k
    # the Galerkin eigenpair itself is only accurate to ~ machine eps * ||H||
    norm = float((freqs ** 2).max()) + abs(s.E) + p.abs_sum
    return escaped + 64 * np.finfo(float).eps * norm * float(np.abs(s.phi).sum())


def check_decay_envelope(p: FourierPotential, s: DispersionSample, cluster=None) -> CheckReport:
    """Eigenvector envelope around the resonance cluster:

    |phi(n)| <= sqrt(eps) sum_{m in cluster} exp(-7/8 kappa0 |n - m|)  (n outside),
    |phi(m)| <= 2                                                     (m inside),
    both up to trunc_error.
    """
    if cluster is None:
        cluster = cluster_or_origin(s.k, p.freq, s.box)
    members = np.array(sorted(cluster.cluster), dtype=np.int64).reshape(-1, p.nu)
    dist = np.abs(s.points[:, None, :] - members[None, :, :]).sum(axis=2)
    inside = (dist == 0).any(axis=1)
    env = math.sqrt(p.eps) * np.exp(-0.875 * p.kappa0 * dist).sum(axis=1)
    allowed = np.where(inside, 2.0, env) + s.trunc_error + 1e-14
    margins = allowed - np.abs(s.phi)
    i = int(np.argmin(margins))
    worst = float(margins[i])
    offender = tuple(int(v) for v in s.points[i])
    findings = [] if worst >= 0 else [f"|phi{offender}| = {abs(s.phi[i]):.6g} exceeds {allowed[i]:.6g}"]
    return CheckReport("decay_envelope", worst >= 0, worst, offender, findings,
                       {"k": s.k, "cluster_size": len(members), "tie": cluster.tie})
