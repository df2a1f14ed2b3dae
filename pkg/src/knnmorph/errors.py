"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented invariant or precondition."""


class KnnfFormatError(ValidationError):
    """A KNNF file is malformed: bad magic, bad version, truncated or
    otherwise inconsistent with its own header."""
