"""Resilience of Rademacher sums: exact solvers, constructions and estimates."""

__version__ = "0.1.0"

from .basis import AdditiveBasis, build_basis, optimal_basis_bruteforce, verify_basis
from .core import (IndexSet, SignVector, WeightSequence, canonicalize, evaluate,
                   evaluate_partial, parity_fix)
from .errors import (ConstructionError, DimensionError, MisuseError, ParityUnfixableError,
                     ResilienceError, ResourceLimitError, UsageError)
from .families import (CertificateFailure, Family, FamilySpec, FlipCertificate, generate,
                       harmonic_certificate, layered_certificate)
from .hypercube import ResilienceProfile, hypercube_profile, qk_exact
from .solver import Exceeded, ResilienceResult, resilience, resilience_bounded, resilience_dp
from .stats import (BerryEsseenStats, EstimateReport, SweepResult, berry_esseen_check,
                    estimate_resilience_prob, max_atom_probability, sweep)

__all__ = [
    "AdditiveBasis", "BerryEsseenStats", "CertificateFailure", "ConstructionError",
    "DimensionError", "EstimateReport", "Exceeded", "Family", "FamilySpec", "FlipCertificate",
    "IndexSet", "MisuseError", "ParityUnfixableError", "ResilienceError", "ResilienceProfile",
    "ResilienceResult", "ResourceLimitError", "SignVector", "SweepResult", "UsageError",
    "WeightSequence", "berry_esseen_check", "build_basis", "canonicalize",
    "estimate_resilience_prob", "evaluate", "evaluate_partial", "generate",
    "harmonic_certificate", "hypercube_profile", "layered_certificate", "max_atom_probability",
    "optimal_basis_bruteforce", "parity_fix", "qk_exact", "resilience", "resilience_bounded",
    "resilience_dp", "sweep", "verify_basis",
]
