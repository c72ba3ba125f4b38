"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class InapplicableBound(DomainError):
    """The hypothesis of a quantitative bound does not hold for the given data."""


class SchemaError(ValueError):
    """Serialized input is malformed or carries an unknown schema version."""


class SearchExhausted(DomainError):
    """A bounded search ran out of budget; ``largest_tested`` records how far it got."""

    def __init__(self, message: str, largest_tested: int):
        super().__init__(message)
        self.largest_tested = largest_tested
