"""Exception types shared across the package."""


class FingerlabError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FingerlabError, ValueError):
    pass


class InvalidConfiguration(FingerlabError, ValueError):
    pass


class InvalidState(FingerlabError, RuntimeError):
    pass


class InvalidMontage(FingerlabError, ValueError):
    pass


class UndefinedTest(FingerlabError, ValueError):
    """A statistical test has no defined value for the given data."""


class AnalysisError(FingerlabError, RuntimeError):
    pass


class SidecarError(FingerlabError, ValueError):
    """Malformed recording sidecar; message names the offending line or field."""
