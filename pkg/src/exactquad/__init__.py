"""Exact quadrature rules for systems of integrable functions.

For any n continuous functions integrable against a finite positive
measure on a real interval, there is an exact quadrature rule with at most
n nodes and non-negative weights summing to the total mass.  This package
constructs such rules, exposes the underlying convex-curve reduction
(every point of the convex hull of a continuous curve in R^n is a convex
combination of at most n curve points), and applies them to covariance
representations and Gruss-type covariance bounds.
"""

from . import errors
from .expr import Expression, continuity_probe, evaluate, parse
from .measure import (
    IntegralVector,
    IntervalSpec,
    MeasureSpec,
    exhaust_interval,
    integrate,
    integrate_system,
    measure_from_json,
    measure_to_json,
    total_mass,
)
from .hull import (
    BarycentricFrame,
    ConvexCombination,
    CurveSystem,
    build_frame,
    caratheodory_finite,
    coords,
    first_zero_crossing,
    reduce_on_curve,
)
from .synth import (
    AffineRankReport,
    QuadratureRule,
    SynthesisConfig,
    VerificationReport,
    affine_rank,
    discretize_hull_point,
    interiority_check,
    rule_from_json,
    rule_to_json,
    synthesize_rule,
    verify_rule,
)
from .stats import (
    CovarianceWitness,
    GrussReport,
    covariance,
    covariance_witness,
    gruss_check,
    gruss_discrete,
)
from .cli import chebyshev_sample_test

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Expression",
    "parse",
    "evaluate",
    "continuity_probe",
    "IntervalSpec",
    "MeasureSpec",
    "IntegralVector",
    "total_mass",
    "integrate",
    "integrate_system",
    "exhaust_interval",
    "measure_from_json",
    "measure_to_json",
    "ConvexCombination",
    "CurveSystem",
    "BarycentricFrame",
    "caratheodory_finite",
    "build_frame",
    "coords",
    "first_zero_crossing",
    "reduce_on_curve",
    "SynthesisConfig",
    "AffineRankReport",
    "QuadratureRule",
    "VerificationReport",
    "affine_rank",
    "discretize_hull_point",
    "interiority_check",
    "synthesize_rule",
    "verify_rule",
    "rule_from_json",
    "rule_to_json",
    "CovarianceWitness",
    "GrussReport",
    "covariance",
    "covariance_witness",
    "gruss_check",
    "gruss_discrete",
    "chebyshev_sample_test",
]
