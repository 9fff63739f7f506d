from __future__ import annotations

import math

import pytest

from qpspec.gaps import build_catalog
from qpspec.potential import FourierPotential, FrequencyVector, analytic_potential, cosine_potential

SQRT2 = math.sqrt(2.0)

# Acceptance results collected by tests/test_acceptance.py: criterion -> (passed, detail)
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def golden_frequency() -> FrequencyVector:
    return FrequencyVector((1.0, SQRT2), 0.5, 2.5)


def golden_potential() -> FourierPotential:
    """nu = 2, omega = (1, sqrt 2), c(n) = 1e-3 exp(-|n|_1) with random Hermitian phases, |n|_1 <= 8."""
    return analytic_potential(golden_frequency(), 1e-3, 1.0, 8, seed=1)


def zero_potential(omega=(1.0,), a0=0.5, b0=None) -> FourierPotential:
    b0 = len(omega) + 1.0 if b0 is None else b0
    return FourierPotential(FrequencyVector(omega, a0, b0), {}, 0.0, 1.0)


@pytest.fixture(scope="session")
def golden():
    return golden_potential()


@pytest.fixture(scope="session")
def golden_catalog(golden):
    return build_catalog(golden, 4, 8)


@pytest.fixture(scope="session")
def certification_catalog(golden):
    # the tail bound of an M = 4 catalog (about 1.1e-2) exceeds sigma_min = 1e-3,
    # so the certificate is computed from a deeper catalog of the same potential
    return build_catalog(golden, 12, 14)


@pytest.fixture(scope="session")
def periodic():
    return cosine_potential(1e-3)


@pytest.fixture(scope="session")
def periodic_catalog(periodic):
    return build_catalog(periodic, 3, 5)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: (int(s.split(".")[0]), s)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
