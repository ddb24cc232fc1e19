"""Exception types raised across the package."""


class SwarmCovError(Exception):
    """Base class for all package errors."""


class DegenerateBox(SwarmCovError, ValueError):
    pass


class ZeroMass(SwarmCovError, ValueError):
    pass


class NonPositiveMass(SwarmCovError, ValueError):
    pass


class DuplicatePositions(SwarmCovError, ValueError):
    pass


class PositionOutsideRegion(SwarmCovError, ValueError):
    pass


class NonUnitDirection(SwarmCovError, ValueError):
    pass


class AlreadyInCollision(SwarmCovError, ValueError):
    """Two agents overlap, so no velocity obstacle exists for the pair."""


class ConfigError(SwarmCovError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


class ValidationError(ConfigError):
    pass
