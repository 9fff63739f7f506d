from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SQRT2, golden_frequency, zero_potential
from qpspec.errors import IllConditionedError
from qpspec.gaps import build_catalog
from qpspec.oracle import FiniteDifferenceModel, discretization_allowance, gap_label_check, ids_estimate, resolution
from qpspec.potential import FourierPotential, cosine_potential


def test_free_dirichlet_spectrum_closed_form():
    L, h = 10.0, 0.1
    model = FiniteDifferenceModel.from_potential(zero_potential(), L, h, "dirichlet")
    n = int(round(L / h))
    for j in (1, 2, 7, 50, n - 1):
        exact = 2.0 / h ** 2 * (1 - math.cos(j * math.pi / n))
        assert model.eigenvalue(j - 1) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_free_neumann_spectrum_closed_form():
    L, h = 10.0, 0.1
    model = FiniteDifferenceModel.from_potential(zero_potential(), L, h, "neumann")
    size = int(round(L / h)) + 1
    assert model.eigenvalue(0) == pytest.approx(0.0, abs=1e-10)
    for j in (1, 3, 40, size - 1):
        exact = 4.0 / h ** 2 * math.sin(j * math.pi / (2 * size)) ** 2
        assert model.eigenvalue(j) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_sturm_count_matches_dense_eigensolver():
    rng = np.random.default_rng(3)
    model = FiniteDifferenceModel(5.0, 0.05, "neumann", rng.normal(size=101))
    d, e = model.tridiagonal()
    w = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    E = np.concatenate([np.linspace(w[0] - 1, w[-1] + 1, 300), (w[:-1] + w[1:]) / 2])
    assert np.array_equal(model.count_below(E), (w[None, :] < E[:, None]).sum(axis=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-50, 500))
def test_dirichlet_neumann_interlace(seed, E):
    # Dirichlet is a principal submatrix of Neumann with two rows removed
    V = np.random.default_rng(seed).normal(size=61)
    dn = FiniteDifferenceModel(3.0, 0.05, "neumann", V)
    dd = FiniteDifferenceModel(3.0, 0.05, "dirichlet", V[1:-1])
    cn, cd = int(dn.count_below(E)[0]), int(dd.count_below(E)[0])
    assert cd <= cn <= cd + 2


def test_free_ids_and_monotonicity():
    E = np.linspace(0.05, 2.0, 40)
    dir_, neu = ids_estimate(zero_potential(), 1000.0, 0.02, E)
    assert np.all(np.diff(dir_) >= 0) and np.all(np.diff(neu) >= 0)
    assert np.all(dir_ <= neu + 1 / 1000.0 + 1e-15)
    i = int(np.argmin(abs(E - 1.0)))
    assert dir_[i] == pytest.approx(math.sqrt(E[i]) / math.pi, rel=0.02)
    assert neu[i] == pytest.approx(math.sqrt(E[i]) / math.pi, rel=0.02)


def test_halving_h_stays_within_allowance():
    E = np.array([0.3, 1.0, 2.5])
    a, _ = ids_estimate(zero_potential(), 500.0, 0.04, E)
    b, _ = ids_estimate(zero_potential(), 500.0, 0.02, E)
    for x, y, e in zip(a, b, E):
        assert abs(x - y) <= discretization_allowance(float(e), 500.0, 0.04)


def test_ill_conditioned_grid():
    with pytest.raises(IllConditionedError):
        FiniteDifferenceModel.from_potential(cosine_potential(20.0), 100.0, 0.1, "dirichlet")


def test_model_rejects_bad_grids():
    with pytest.raises(ValueError):
        FiniteDifferenceModel(1.0, 0.3, "dirichlet", np.zeros(3))
    with pytest.raises(ValueError):
        FiniteDifferenceModel(10.0, 0.1, "periodic", np.zeros(99))


def test_resolution_example():
    assert resolution(1.0, 2000.0) == pytest.approx(1.5708e-3, rel=1e-4)
    assert resolution(-SQRT2, 1000.0) == pytest.approx(math.pi * SQRT2 / 1000)


def test_periodic_plateau_and_edges():
    p = cosine_potential(1e-2)
    cat = build_catalog(p, 2, 4)
    rep = gap_label_check(cat, p, L=500.0, h=0.05)
    assert rep.values["selected"] >= 1
    assert rep.passed, rep.findings


def test_two_frequency_plateau():
    f = golden_frequency()
    p = FourierPotential(f, {(0, 1): 1e-2, (0, -1): 1e-2}, 0.03, 1.0)
    cat = build_catalog(p, 1, 3)
    g = cat[(0, 1)]
    assert g.width == pytest.approx(2e-2, rel=1e-2)
    rep = gap_label_check(cat, p, L=500.0, h=0.05)
    assert rep.passed, rep.findings
    plateau = float(rep.values["(0, 1) dirichlet"].split()[0].split("=")[1])
    assert plateau == pytest.approx(SQRT2 / (2 * math.pi), abs=5 / 500)


def test_wrong_label_is_caught():
    p = cosine_potential(1e-2)
    cat = build_catalog(p, 2, 4)
    # shift the first gap by 0.2: neither plateau nor edges can match
    g = cat[(1,)]
    moved = dataclasses.replace(g, e_minus=g.e_minus + 0.2, e_plus=g.e_plus + 0.2)
    bad = dataclasses.replace(cat, gaps=tuple(moved if x.m == (1,) else x for x in cat.gaps))
    rep = gap_label_check(bad, p, L=500.0, h=0.05)
    assert not rep.passed and rep.offender[0] == (1,)
