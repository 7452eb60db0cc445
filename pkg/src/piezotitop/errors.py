"""Exception hierarchy shared by the modeling pipeline."""


class TitopError(Exception):
    """Base class for all package errors."""


class ParameterError(TitopError, ValueError):
    """Invalid physical or geometric parameter."""


class ConfigurationError(TitopError, ValueError):
    """Inconsistent model configuration (coverage, topology, ports)."""


class BoundaryConditionError(TitopError):
    """Boundary conditions leave the stiffness singular."""


class ModelError(TitopError):
    """Structurally invalid model (singular mass, under-constrained)."""


class NumericalError(TitopError):
    """A numerical kernel failed or produced an invalid result."""


class IllPosedInterconnectionError(TitopError):
    """Algebraic loop of an interconnection is singular."""


class PiezoParameterWarning(UserWarning):
    """Piezo data is accepted but physically suspect."""
