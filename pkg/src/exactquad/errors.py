"""Exception types shared across the library.

Every exception carries a stable machine-readable ``kind`` string so callers
(and the CLI) can branch on failure classes without parsing messages.
"""

from __future__ import annotations


class ExactQuadError(Exception):
    """Base class for all library failures."""

    kind = "error"


class SchemaError(ExactQuadError):
    """Invalid input object: bad field, unknown field, broken invariant."""

    kind = "schema"


class SyntaxParseError(SchemaError):
    """Expression text could not be parsed; ``offset`` is a 0-based byte offset."""

    kind = "syntax"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(SyntaxParseError):
    kind = "unknown-identifier"


class EvalDomainError(ExactQuadError):
    """Evaluation left the real domain; ``subexpr`` names the offending piece."""

    kind = "domain"

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


class NonConvergenceError(ExactQuadError):
    kind = "non-convergence"


class DivergentMassError(ExactQuadError):
    kind = "divergent-mass"


class MomentDivergenceError(ExactQuadError):
    kind = "moment-divergence"


class NegativeDensityError(ExactQuadError):
    kind = "negative-density"


class InfeasibleCombinationError(ExactQuadError):
    kind = "infeasible-combination"


class RankDeficiencyError(ExactQuadError):
    kind = "rank-deficient"


class NoCrossingError(ExactQuadError):
    kind = "no-crossing"


class ReconstructionError(ExactQuadError):
    kind = "reconstruction-failure"


class DiscretizationError(ExactQuadError):
    kind = "discretization-cap"


class PolishError(ExactQuadError):
    kind = "polish-failure"


class UnboundedFunctionError(ExactQuadError):
    kind = "unbounded-function"


class WeightNormalizationError(ExactQuadError):
    kind = "weight-normalization"
