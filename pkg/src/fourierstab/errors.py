"""Shared exception types."""


class DimensionError(ValueError):
    """An input's shape does not match the declared ambient dimension."""


class CapacityError(ValueError):
    """The requested dimension exceeds the exact-enumeration cap."""


class DegenerateFunctionError(ValueError):
    """All degree-1 coefficients vanish (the function is constant)."""


class SchemaError(ValueError):
    """A serialized model or dataset file does not match the expected layout."""
