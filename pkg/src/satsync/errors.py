"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed or inconsistent user input (scenario files, graphs, matrices).

    The message carries the offending field path where one exists.
    """


class SynthesisError(RuntimeError):
    """A gain-synthesis or matrix-equation solve could not produce a valid result."""


class IntegrationError(RuntimeError):
    """Integration aborted; carries the time stamp of the failure."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
