"""Exception hierarchy shared across the pipeline.

Each class maps to one CLI exit code so stage failures stay distinguishable
in shell pipelines: configuration problems exit 1, bad input data exits 2,
remote backend failures exit 3.
"""


class GreencastError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(GreencastError):
    """Invalid configuration or parameter combination."""

    exit_code = 1


class InputError(GreencastError):
    """Missing or malformed input data."""

    exit_code = 2


class RemoteBackendError(GreencastError):
    """A remote embedding or chat backend failed after retries."""

    exit_code = 3

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class MatchProtocolError(GreencastError):
    """A validation reply violated the expected reply grammar."""

    exit_code = 1

    def __init__(self, message: str, reply: str = ""):
        super().__init__(message)
        self.reply = reply
