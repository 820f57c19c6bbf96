"""Shared exception types."""


class ParseError(ValueError):
    """A game or profile file could not be parsed."""


class StructureError(ValueError):
    """A node list does not describe a valid decision problem."""


class MembershipError(ValueError):
    """A vector is not a valid tree-form strategy point."""


class InvalidDeviationError(ValueError):
    """A deviation map does not send pure strategies into the strategy polytope."""


class CapacityError(RuntimeError):
    """An enumeration or construction exceeded its configured size cap."""
