"""Exception hierarchy shared by every module."""


class MapError(Exception):
    """Base class for all errors raised by mapsolver."""


class DomainError(MapError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParseError(MapError):
    """Malformed instance or cache file."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class IntegrityError(MapError):
    """A stored result contradicts a known invariant."""


class ConfigError(MapError):
    """Invalid experiment configuration."""
