"""Exception types shared across the package."""


class CohortqError(Exception):
    pass


class RangeError(CohortqError):
    """A value does not fit the target representation (fixed-point overflow etc.)."""


class PartitionError(CohortqError):
    """A row was routed to a bucket its entity does not hash to."""


class IdError(CohortqError):
    """Reference to an unknown concept node, connector, filter or select."""


class ConceptParseError(CohortqError):
    """Malformed concept descriptor; message carries the document path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ValidationError(CohortqError):
    """Query document rejected; lists every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PlanError(CohortqError):
    """Query cannot be planned (e.g. referenced saved query not finished)."""


class IngestError(CohortqError):
    """Input file or import descriptor rejected during preprocessing."""


class ProtocolError(CohortqError):
    """Malformed or incompatible cluster message."""
