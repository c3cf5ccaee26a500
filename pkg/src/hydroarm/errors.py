"""Exception types shared across the package."""


class HydroArmError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HydroArmError):
    """Physical state left the valid domain (stroke limit, chamber volume,
    degenerate linkage, inconsistent pressures)."""


class ConfigError(HydroArmError):
    """Invalid or missing configuration."""


class ModelFormatError(HydroArmError):
    """Model file is corrupt, truncated, or structurally inconsistent."""


class WorkspaceError(HydroArmError):
    """Cartesian target outside the reachable workspace."""


class TrainingDivergedError(HydroArmError):
    """Training loss blew up past the divergence guard."""


class ControlError(HydroArmError):
    """Controller produced or received a non-finite quantity."""
