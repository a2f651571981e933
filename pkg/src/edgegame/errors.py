"""Exception types shared across the package."""


class EdgeGameError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EdgeGameError):
    """Invalid game or experiment parameters."""


class BuilderProtocolError(EdgeGameError):
    """Builder emitted an illegal edge (self-loop, repeat, or degree violation)."""


class TrackingError(EdgeGameError):
    """Requested quantity was not recorded by the instrumentation."""


class DegeneratePaletteError(EdgeGameError):
    """A palette snapshot is empty where a nonempty one is required."""


class OracleCapError(EdgeGameError):
    """Instance exceeds the hard size cap of an exact enumeration oracle."""
