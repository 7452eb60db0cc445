"""
Actuated double-port (TITOP) models of beams with bonded piezoelectric
strips: finite elements, component modes synthesis, state-space blocks,
chain interconnection and rate-feedback damping studies.
"""

from .analysis import bode, modal_frequencies, root_locus, simulate
from .cms import reduce
from .errors import (
    BoundaryConditionError,
    ConfigurationError,
    IllPosedInterconnectionError,
    ModelError,
    NumericalError,
    ParameterError,
    PiezoParameterWarning,
    TitopError,
)
from .fe_piezo_beam import BeamSection, PiezoSection, VoltageTopology, assemble
from .interconnect import apply_boundary, chain, close_rate_feedback, connect
from .ports import PortSystem
from .titop import DampingSpec, build_titop, component

__all__ = [
    "BeamSection", "BoundaryConditionError", "ConfigurationError", "DampingSpec",
    "IllPosedInterconnectionError", "ModelError", "NumericalError", "ParameterError",
    "PiezoParameterWarning", "PiezoSection", "PortSystem", "TitopError", "VoltageTopology",
    "apply_boundary", "assemble", "bode", "build_titop", "chain", "close_rate_feedback",
    "component", "connect", "modal_frequencies", "reduce", "root_locus", "simulate",
]

__version__ = "0.1.0"
