"""Labeled linear state-space systems used for interconnection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError, NumericalError

#: physical kind of each port group
PORT_KINDS = {
    "acc_P": "acceleration",
    "acc_Q": "acceleration",
    "F_P": "load",
    "F_Q": "load",
    "v": "voltage",
    "g": "charge",
    "rate": "velocity",
}

_ROTATIONAL = {"theta", "rx", "ry", "rz"}

#: relative distance to an eigenvalue below which a sample is a pole
POLE_TOL = 1e-10


class SingularSampleError(NumericalError):
    """Frequency sample coincides with an undamped pole."""


def port_group(label: str) -> str:
    parts = label.split(".")
    return parts[-2] if len(parts) >= 2 else parts[0]


def port_units(label: str) -> str:
    """SI units of a port channel from its label."""
    parts = label.split(".")
    kind = PORT_KINDS.get(port_group(label), "")
    rot = parts[-1] in _ROTATIONAL
    return {
        "acceleration": "rad/s^2" if rot else "m/s^2",
        "load": "N*m" if rot else "N",
        "voltage": "V",
        "charge": "C",
        "velocity": "m/s",
    }.get(kind, "")


def sort_poles(p: np.ndarray) -> np.ndarray:
    """Order by magnitude, then by angle; conjugates end up adjacent."""
    p = np.asarray(p, complex)
    mag = np.abs(p)
    scale = mag.max(initial=0.0) or 1.0
    key_mag = np.round(mag / scale, 10)
    order = np.lexsort((np.angle(p), key_mag))
    return p[order]


@dataclass(frozen=True)
class PortSystem:
    """
    ``x' = A x + B u``, ``y = C x + D u`` with one label per input, output
    and state channel. Labels have the form ``component.group.channel``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: tuple
    outputs: tuple
    states: tuple = field(default=())

    def __post_init__(self):
        A = np.asarray(self.A, float)
        if A.size == 0:
            A = np.zeros((0, 0))
        nx = A.shape[0]
        nu, ny = len(self.inputs), len(self.outputs)
        B = np.asarray(self.B, float).reshape(nx, nu)
        C = np.asarray(self.C, float).reshape(ny, nx)
        D = np.asarray(self.D, float).reshape(ny, nu)
        if A.shape != (nx, nx):
            raise ConfigurationError("A must be square")
        states = tuple(self.states) or tuple(f"x{i}" for i in range(nx))
        if len(states) != nx:
            raise ConfigurationError("state label count does not match A")
        for kind, labels in (("input", self.inputs), ("output", self.outputs)):
            if len(set(labels)) != len(labels):
                dup = sorted({x for x in labels if list(labels).count(x) > 1})
                raise ConfigurationError(f"duplicate {kind} labels: {dup}")
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "states", states)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self):
        """(outputs, inputs)"""
        return len(self.outputs), len(self.inputs)

    def input_index(self, labels) -> np.ndarray:
        return _lookup(self.inputs, labels, "input")

    def output_index(self, labels) -> np.ndarray:
        return _lookup(self.outputs, labels, "output")

    def match_inputs(self, pattern: str) -> list:
        return [x for x in self.inputs if fnmatchcase(x, pattern)]

    def match_outputs(self, pattern: str) -> list:
        return [y for y in self.outputs if fnmatchcase(y, pattern)]

    @cached_property
    def _eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n_states else np.zeros(0, complex)

    def poles(self) -> np.ndarray:
        return sort_poles(self._eigenvalues)

    def transfer_at(self, omega: float) -> np.ndarray:
        """``G(j omega) = C (j omega I - A)^-1 B + D``."""
        if omega < 0:
            raise ConfigurationError("omega must be non-negative")
        if self.n_states == 0:
            return self.D.astype(complex)
        lam = self._eigenvalues
        s = 1j * omega
        if np.any(np.abs(s - lam) <= POLE_TOL * np.maximum(np.abs(lam), 1.0)):
            raise SingularSampleError(f"omega = {omega:g} rad/s is a pole of the system")
        Z = s * np.eye(self.n_states) - self.A
        # rcond is dominated by the stiffness scaling of A, not by pole proximity,
        # which is tested above
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            X = la.solve(Z, self.B.astype(complex), check_finite=False)
        return self.C @ X + self.D

    def select(self, inputs: Sequence[str] | None = None,
               outputs: Sequence[str] | None = None) -> "PortSystem":
        """Subsystem restricted to the given channels (states unchanged)."""
        iu = self.input_index(inputs) if inputs is not None else np.arange(len(self.inputs))
        iy = self.output_index(outputs) if outputs is not None else np.arange(len(self.outputs))
        return PortSystem(self.A, self.B[:, iu], self.C[iy], self.D[np.ix_(iy, iu)],
                          tuple(self.inputs[i] for i in iu),
                          tuple(self.outputs[i] for i in iy), self.states)

    def drop_inputs(self, labels: Iterable[str]) -> "PortSystem":
        """Hold the given inputs at zero and remove them."""
        drop = set(self.input_index(list(labels)))
        keep = [self.inputs[i] for i in range(len(self.inputs)) if i not in drop]
        return self.select(inputs=keep)

    def dc_gain(self) -> np.ndarray:
        return self.transfer_at(0.0).real


def _lookup(labels: tuple, wanted, kind: str) -> np.ndarray:
    if isinstance(wanted, str):
        wanted = [wanted]
    pos = {name: i for i, name in enumerate(labels)}
    missing = [w for w in wanted if w not in pos]
    if missing:
        raise ConfigurationError(f"unknown {kind} port(s): {missing}")
    return np.array([pos[w] for w in wanted], int)


def append(*systems: PortSystem) -> PortSystem:
    """Block-diagonal stacking without any connection."""
    A = la.block_diag(*[s.A for s in systems])
    B = la.block_diag(*[s.B for s in systems])
    C = la.block_diag(*[s.C for s in systems])
    D = la.block_diag(*[s.D for s in systems])
    nx = sum(s.n_states for s in systems)
    nu = sum(len(s.inputs) for s in systems)
    ny = sum(len(s.outputs) for s in systems)
    return PortSystem(A.reshape(nx, nx), B.reshape(nx, nu), C.reshape(ny, nx),
                      D.reshape(ny, nu),
                      sum((s.inputs for s in systems), ()),
                      sum((s.outputs for s in systems), ()),
                      sum((s.states for s in systems), ()))
