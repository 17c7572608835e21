class MonodromyError(ValueError):
    """Base class of every domain error raised by the engine."""


class InvalidCharacteristic(MonodromyError):
    pass


class OrderUnavailable(MonodromyError):
    pass


class RamifiedPrime(MonodromyError):
    pass


class ResidueFieldTooSmall(MonodromyError):
    pass


class NotIntegralAtPrime(MonodromyError):
    pass


class FieldMismatch(MonodromyError):
    pass


class SingularMatrix(MonodromyError):
    pass


class NotInvariant(MonodromyError):
    pass


class EigenvalueOutsideField(MonodromyError):
    pass


class ProductRelationViolated(MonodromyError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularEntry(MonodromyError):
    def __init__(self, index: int):
        super().__init__(f"entry {index} is not invertible")
        self.index = index


class ConditionAViolated(MonodromyError):
    pass


class InvalidM(MonodromyError):
    pass


class InvalidRankOnePattern(MonodromyError):
    pass


class ArityMismatch(MonodromyError):
    pass


class ParseError(MonodromyError):
    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class InvalidCharacter(MonodromyError):
    pass


class TooFewPoints(MonodromyError):
    pass


class BadReductionPrime(MonodromyError):
    pass


class HypothesisViolation(MonodromyError):
    pass


class RankMismatch(MonodromyError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected rank {expected}, got {got}")
        self.expected = expected
        self.got = got


class ConjugacyUndecided(MonodromyError):
    """No invertible solution was found and the solution space is too large to enumerate."""

    def __init__(self, message: str, dimension: int):
        super().__init__(message)
        self.dimension = dimension
