"""Exception hierarchy: input/contract errors map to CLI exit code 2."""


class RediError(Exception):
    """Base class for engine errors (CLI exit code 1)."""


class InputError(RediError):
    """Malformed or inconsistent user input (CLI exit code 2)."""


class ReasonerError(RediError):
    """Reasoner backend failure (network, parse, or cache miss)."""
