"""Exception hierarchy.

Violations of hypotheses and failed verifications are returned as data;
exceptions are reserved for inputs a routine cannot work with and for
numerical breakdowns.
"""

from __future__ import annotations


class QPSpecError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateFrequencyError(QPSpecError):
    """A lattice point n with n . omega == 0 exactly was found."""

    def __init__(self, n: tuple[int, ...]):
        super().__init__(f"rationally dependent frequency vector: n.omega == 0 at n = {n}")
        self.n = n


class NonresonantError(QPSpecError):
    """No resonant index inside the search box."""


class AmbiguousSelectionError(QPSpecError):
    """Two eigenvectors carry almost the same weight at the origin."""

    def __init__(self, k: float, weights: tuple[float, float]):
        super().__init__(
            f"ambiguous eigenpair selection at k = {k!r}: |v(0)| values {weights[0]:.6g}, {weights[1]:.6g}"
        )
        self.k = k
        self.weights = weights


class ClusterOverlapError(QPSpecError):
    """The resonance cluster does not fit into the Galerkin box."""


class DimensionCapError(QPSpecError):
    """Galerkin box dimension exceeds the configured cap."""


class NonConvergenceError(QPSpecError):
    """An eigensolve or refinement loop failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class GapResolutionError(QPSpecError):
    """Gap edges for a label could not be identified."""


class ConstantsTooWeakError(QPSpecError):
    """No sigma_0 > 0 satisfies the small-window branch of the homogeneity argument."""


class CertificationInconclusiveError(NonConvergenceError):
    """Certification neither passed nor produced a witness."""


class ConfigError(QPSpecError):
    """Syntax or semantic error in a problem configuration."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class IllConditionedError(QPSpecError):
    """A discretization is too coarse for the size of the potential."""
