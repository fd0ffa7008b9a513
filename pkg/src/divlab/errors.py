"""Exception types shared across the package.

The CLI maps ParameterError/CapacityError/ValidationError to exit status 1
and VerificationError to exit status 2.
"""


class DivlabError(Exception):
    pass


class ParameterError(DivlabError, ValueError):
    """Bad argument values (ranges, lengths, malformed input)."""


class CapacityError(DivlabError):
    """The requested instance exceeds an enumeration or memory budget."""


class ValidationError(DivlabError, ValueError):
    """An input object violates a structural precondition."""


class PreconditionError(DivlabError):
    """A mathematical hypothesis required by a check does not hold."""


class VerificationError(DivlabError):
    """A claimed inequality or identity failed on a concrete instance.

    `instance` carries whatever is needed to reproduce the failure.
    """

    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance
