"""Error types raised by the library.

Every error carries a stable ``code`` string so the CLI can emit
machine-readable failures.
"""


class EulerSparseError(Exception):
    """Base class for all library errors."""

    code = "EulerSparseError"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class NonPositiveWeight(EulerSparseError, ValueError):
    code = "NonPositiveWeight"


class SelfLoop(EulerSparseError, ValueError):
    code = "SelfLoop"


class VertexOutOfRange(EulerSparseError, ValueError):
    code = "VertexOutOfRange"


class DimensionMismatch(EulerSparseError, ValueError):
    code = "DimensionMismatch"


class Disconnected(EulerSparseError, ValueError):
    code = "Disconnected"


class NotPSD(EulerSparseError, ValueError):
    code = "NotPSD"


class NoConvergence(EulerSparseError, RuntimeError):
    code = "NoConvergence"


class PreconditionViolated(EulerSparseError, ValueError):
    code = "PreconditionViolated"


class DegenerateConstraint(EulerSparseError, ValueError):
    code = "DegenerateConstraint"


class NotATree(EulerSparseError, ValueError):
    code = "NotATree"


class NotEulerian(EulerSparseError, ValueError):
    code = "NotEulerian"


class NotBipartiteLift(EulerSparseError, ValueError):
    code = "NotBipartiteLift"


class QualityNotMet(EulerSparseError, RuntimeError):
    code = "QualityNotMet"


class NotIrreducible(EulerSparseError, ValueError):
    code = "NotIrreducible"


class InfeasibleParameters(EulerSparseError, ValueError):
    code = "InfeasibleParameters"


class ParseError(EulerSparseError, ValueError):
    code = "ParseError"
