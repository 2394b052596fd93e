"""Exception types shared across the reconstruction pipeline."""


class UrbanReconError(Exception):
    """Base class for all library errors."""


class DegenerateInput(UrbanReconError):
    """Geometric input insufficient for the requested construction."""


class ParseError(UrbanReconError):
    """Malformed input file. Carries a location hint when available."""

    def __init__(self, message, path=None, line=None, offset=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"byte {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.offset = offset


class UnsupportedFormat(UrbanReconError):
    pass


class InvalidGeometry(UrbanReconError):
    def __init__(self, message, feature_id=None):
        if feature_id is not None:
            message = f"{message} (feature {feature_id!r})"
        super().__init__(message)
        self.feature_id = feature_id


class MissingLabels(UrbanReconError):
    pass


class TooFewPoints(UrbanReconError):
    pass


class TooFewPixels(UrbanReconError):
    pass


class OpenBoundary(UrbanReconError):
    """Outer wall traces do not form a closed loop."""


class NoRoofPlanes(UrbanReconError):
    pass


class InfeasibleByConstruction(UrbanReconError):
    """Hard constraints contradict each other before solving starts."""


class Infeasible(UrbanReconError):
    """The face-selection program has no feasible assignment."""


class SolverTimeout(UrbanReconError):
    """Time limit hit without proving optimality. May carry an incumbent."""

    def __init__(self, message, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class NonManifoldResult(UrbanReconError):
    """Extracted mesh violates the two-faces-per-edge rule; indicates a bug."""


class ConfigError(UrbanReconError):
    pass
