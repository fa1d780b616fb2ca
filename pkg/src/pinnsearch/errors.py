"""Shared exception types."""


class ContractError(ValueError):
    """A caller violated a documented precondition (bad shapes, out-of-domain points, ...)."""


class ZeroVectorError(ContractError):
    """Cosine similarity requested for a zero vector."""


class ConfigFormatError(ValueError):
    """A config document failed parsing; the message names the offending key."""


class DatabaseError(IOError):
    """Run-store I/O or consistency failure; the message carries the path."""


class LlmFallback(Exception):
    """The chat planner could not produce a usable config; callers fall back to tree search."""
