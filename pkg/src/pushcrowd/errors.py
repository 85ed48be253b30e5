"""Exception hierarchy shared by all modules."""


class CrowdError(Exception):
    """Base class for every error raised by pushcrowd."""


class GeometryError(CrowdError):
    pass


class OutOfBounds(GeometryError):
    pass


class OverlapConflict(GeometryError):
    pass


class DisconnectedDomain(GeometryError):
    pass


class PotentialError(CrowdError):
    pass


class NonConvergence(PotentialError):
    pass


class NoTarget(PotentialError):
    pass


class DimensionMismatch(CrowdError):
    pass


class CflViolation(CrowdError):
    def __init__(self, ratio: float, message: str | None = None):
        self.ratio = ratio
        super().__init__(message or f"CFL ratio {ratio:.6g} exceeds 1")


class NegativeDensity(CrowdError):
    pass


class ZeroMass(CrowdError):
    pass


class ScenarioError(CrowdError):
    """Parse or validation failure; ``errors`` holds one message per problem."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass
