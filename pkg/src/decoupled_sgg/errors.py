"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(InvalidInputError):
    """More ground truths than prediction slots."""


class ConfigError(ValueError):
    """A configuration is inconsistent or incompatible."""


class InfeasibleSplitError(ValueError):
    """A compositional holdout would drop a vocabulary component from the seen set."""


class AnnotationParseError(ValueError):
    """A corpus file is malformed. The message names the offending video/frame."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""
