"""Certified-precision toolkit for Diophantine approximation.

Interval enclosures with directed rounding (numkernel), exact continued
fractions and the divergence-forcing constructor (contfrac), approximation
exponent scans and density analysis (approx), generalized sine-like series
with certified partial sums (series), and the convergence partition
planner (partition).  The cli module wires them into reproducible
command-line experiments.
"""

from .contfrac import CFExpansion, CFValueSource, MuSpec
from .errors import (
    DegenerateDenominatorError,
    DigitBudgetError,
    DomainError,
    HypothesisViolation,
    InfeasiblePlanError,
    PrecisionExhausted,
    ResourceLimitError,
)
from .numkernel import (
    DEFAULT_POLICY,
    AlphaSource,
    CertReal,
    FixedSource,
    GoldenSource,
    PiSource,
    PrecisionPolicy,
    RationalSource,
    ReciprocalSource,
    Sqrt2Source,
    nearest_lattice_distance,
    pi_enclosure,
    sin_abs_enclosure,
)

__all__ = [
    "AlphaSource",
    "CertReal",
    "CFExpansion",
    "CFValueSource",
    "DEFAULT_POLICY",
    "DegenerateDenominatorError",
    "DigitBudgetError",
    "DomainError",
    "FixedSource",
    "GoldenSource",
    "HypothesisViolation",
    "InfeasiblePlanError",
    "MuSpec",
    "PiSource",
    "PrecisionExhausted",
    "PrecisionPolicy",
    "RationalSource",
    "ReciprocalSource",
    "ResourceLimitError",
    "Sqrt2Source",
    "nearest_lattice_distance",
    "pi_enclosure",
    "sin_abs_enclosure",
]

__version__ = "0.1.0"
