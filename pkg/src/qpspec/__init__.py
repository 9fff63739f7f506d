"""Spectra, gap catalogs and homogeneity certificates for 1D quasi-periodic Schrodinger operators."""

from .dispersion import build_matrix, dispersion_at, gap_edges, verify_dispersion_bounds
from .gaps import Gap, GapCatalog, build_catalog, tail_bound
from .homogeneity import SpectrumSet, certify, certify_catalog, intersect_measure, proof_replay
from .potential import (FourierPotential, FrequencyVector, analytic_potential, cosine_potential,
                        validate_potential)

__all__ = [
    "FourierPotential", "FrequencyVector", "Gap", "GapCatalog", "SpectrumSet",
    "analytic_potential", "build_catalog", "cosine_potential", "build_matrix", "certify", "certify_catalog",
    "dispersion_at", "gap_edges", "intersect_measure", "proof_replay", "tail_bound",
    "validate_potential", "verify_dispersion_bounds",
]
