from typing import Optional


class ValdiffError(Exception):
    """Base class for domain errors. `kind` is reported verbatim by the CLI."""

    kind = "domain-error"

    def __init__(self, message: str, location: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.location = location

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message, "location": self.location}


class DimensionMismatch(ValdiffError):
    kind = "dimension-mismatch"


class IncompatibleInstances(ValdiffError):
    kind = "incompatible-instances"


class ZeroSeriesError(ValdiffError):
    kind = "zero-input"


class PrecisionExhausted(ValdiffError):
    kind = "indeterminate-at-precision"


class NegativeValuation(ValdiffError):
    kind = "negative-valuation"


class Axiom1Unsupported(ValdiffError):
    kind = "axiom-1-unsupported"


class OracleUnsupported(ValdiffError):
    kind = "oracle-unsupported"


class RefinementStalled(ValdiffError):
    kind = "refinement-stalled"


class ResidueRootUnsupported(ValdiffError):
    kind = "residue-root-unsupported"


class NotATropicalZero(ValdiffError):
    kind = "not-a-tropical-zero"


class ConstantPolynomial(ValdiffError):
    kind = "constant-polynomial"


class TraceTooShort(ValdiffError):
    kind = "trace-too-short"


class LogarithmNeeded(ValdiffError):
    kind = "logarithm-needed"


class EPartNonzero(ValdiffError):
    kind = "epart-nonzero"


class OperatorNotContracting(ValdiffError):
    kind = "operator-not-contracting"


class ZeroOperator(ValdiffError):
    kind = "zero-operator"


class ParseError(ValdiffError):
    kind = "parse-error"

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(message, {"line": line, "column": column})
        self.line = line
        self.column = column


class UsageError(ValdiffError):
    kind = "usage-error"
