"""Exception types shared across the toolkit."""


class LdkitError(Exception):
    """Base class for toolkit errors."""


class UnknownSystemError(LdkitError):
    """Requested system id is not in the registry."""


class OracleNotFoundError(LdkitError):
    """No closed-form oracle registered for this (system, descriptor) pair."""


class NoExactSolutionError(LdkitError):
    """No exact flow map registered for this system."""


class FileFormatError(LdkitError):
    """A data file is malformed or has an unsupported version."""


class BlowUpError(LdkitError):
    """A trajectory left the finite range of double precision.

    Carries the last time at which the state was still finite.
    """

    def __init__(self, last_finite_time: float):
        super().__init__(f"non-finite state encountered; last finite time t={last_finite_time!r}")
        self.last_finite_time = last_finite_time
