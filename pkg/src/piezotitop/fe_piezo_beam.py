"""
Finite-element matrices of a planar beam with bonded piezoelectric strips.

Each node carries the axial displacement ``u``, the transverse deflection
``w`` and the section rotation ``theta = dw/dx``. Nodes are numbered left to
right starting at 0, so node 0 is the connection point P and node
``n_elements`` is the connection point Q.

The assembled model obeys::

    M_uu u'' + K_uu u + K_uv v = F
    K_vu u   + K_vv v          = g

with ``K_vu = K_uv.T``, ``v`` the electrode voltages and ``g`` the charges.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as la

from .errors import (
    BoundaryConditionError,
    ConfigurationError,
    ParameterError,
    PiezoParameterWarning,
)

PLANAR_DOFS = ("u", "w", "theta")
SPATIAL_DOFS = ("ux", "uy", "uz", "rx", "ry", "rz")

IP_FORMULAS = ("paper", "parallel_axis")
TOPOLOGIES = ("shared", "per_element")


def _positive(**values):
    for name, val in values.items():
        if not np.isfinite(val) or val <= 0:
            raise ParameterError(f"{name} must be strictly positive, got {val!r}")


@dataclass(frozen=True)
class BeamSection:
    """Uniform rectangular beam split into equal elements (SI units)."""

    length: float
    n_elements: int
    thickness: float
    width: float
    density: float
    modulus: float

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ParameterError(
                f"n_elements must be a positive integer, got {self.n_elements!r}"
            )
        object.__setattr__(self, "n_elements", int(self.n_elements))
        _positive(
            length=self.length,
            thickness=self.thickness,
            width=self.width,
            density=self.density,
            modulus=self.modulus,
        )

    @property
    def element_length(self) -> float:
        return self.length / self.n_elements

    @property
    def area(self) -> float:
        return self.width * self.thickness

    @property
    def inertia(self) -> float:
        return self.width * self.thickness**3 / 12.0

    @property
    def mass(self) -> float:
        return self.density * self.area * self.length


@dataclass(frozen=True)
class PiezoSection:
    """
    Piezoelectric strip bonded on one face of the beam.

    ``covered_elements`` holds 1-based element indices; ``None`` means the
    strip covers every element. ``ip_formula`` selects the bending inertia
    of the strip about the beam axis: ``"paper"`` uses
    ``w_p t_p (t**2 + t_p t + t_p/2)`` verbatim, while
    ``"parallel_axis"`` uses the strip centroid offset ``(t + t_p)/2``.
    """

    thickness: float
    width: float
    density: float
    modulus: float
    d31: float
    eps33: float
    covered_elements: Optional[tuple] = None
    ip_formula: str = "paper"

    def __post_init__(self):
        _positive(
            thickness=self.thickness,
            width=self.width,
            density=self.density,
            modulus=self.modulus,
        )
        if not np.isfinite(self.d31) or not np.isfinite(self.eps33):
            raise ParameterError("d31 and eps33 must be finite")
        if self.ip_formula not in IP_FORMULAS:
            raise ParameterError(
                f"ip_formula must be one of {IP_FORMULAS}, got {self.ip_formula!r}"
            )
        if self.covered_elements is not None:
            cov = tuple(sorted({int(e) for e in self.covered_elements}))
            object.__setattr__(self, "covered_elements", cov)

    @property
    def area(self) -> float:
        return self.width * self.thickness

    def inertia(self, beam: BeamSection) -> float:
        t, tp, wp = beam.thickness, self.thickness, self.width
        if self.ip_formula == "paper":
            return wp * tp * (t**2 + tp * t + tp / 2.0)
        return wp * tp * ((t + tp) / 2.0) ** 2 + wp * tp**3 / 12.0

    def lever_arm(self, beam: BeamSection) -> float:
        return beam.thickness + self.thickness / 2.0

    def coverage(self, beam: BeamSection) -> tuple:
        """1-based covered element indices, validated against the mesh."""
        if self.covered_elements is None:
            return tuple(range(1, beam.n_elements + 1))
        bad = [e for e in self.covered_elements if not 1 <= e <= beam.n_elements]
        if bad:
            raise ConfigurationError(
                f"covered elements {bad} outside 1..{beam.n_elements}"
            )
        return self.covered_elements


@dataclass(frozen=True)
class ElementMatrices:
    mass: np.ndarray
    stiffness: np.ndarray
    coupling: np.ndarray
    capacitance: np.ndarray


@dataclass(frozen=True)
class VoltageTopology:
    """
    Mapping from covered elements to voltage channels.

    Build with :meth:`shared` or :meth:`per_element` rather than directly.
    """

    mode: str
    channel_of_element: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in TOPOLOGIES:
            raise ConfigurationError(
                f"voltage topology must be one of {TOPOLOGIES}, got {self.mode!r}"
            )
        channels = list(self.channel_of_element.values())
        if self.mode == "shared" and channels and set(channels) != {0}:
            raise ConfigurationError("shared topology must use a single channel 0")
        if self.mode == "per_element" and len(set(channels)) != len(channels):
            raise ConfigurationError("per_element topology needs distinct channels")

    @classmethod
    def shared(cls, elements: Iterable[int]) -> "VoltageTopology":
        return cls("shared", {int(e): 0 for e in elements})

    @classmethod
    def per_element(cls, elements: Iterable[int]) -> "VoltageTopology":
        return cls(
            "per_element", {int(e): k for k, e in enumerate(sorted(set(elements)))}
        )

    @classmethod
    def from_mode(cls, mode: str, elements: Iterable[int]) -> "VoltageTopology":
        if mode == "shared":
            return cls.shared(elements)
        if mode == "per_element":
            return cls.per_element(elements)
        raise ConfigurationError(
            f"voltage topology must be one of {TOPOLOGIES}, got {mode!r}"
        )

    @property
    def n_channels(self) -> int:
        return len(set(self.channel_of_element.values()))


@dataclass(frozen=True)
class FeModel:
    """Assembled global matrices plus DOF bookkeeping."""

    coords: np.ndarray
    dof_names: tuple
    M: np.ndarray
    K: np.ndarray
    Kuv: np.ndarray
    Kvv: np.ndarray
    nonphysical_capacitance: bool = False

    @property
    def dofs_per_node(self) -> int:
        return len(self.dof_names)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_dof(self) -> int:
        return self.M.shape[0]

    @property
    def n_channels(self) -> int:
        return self.Kuv.shape[1]

    @property
    def Kvu(self) -> np.ndarray:
        return self.Kuv.T

    def dof(self, node: int, name: str) -> int:
        if not 0 <= node < self.n_nodes:
            raise ConfigurationError(f"node {node} outside 0..{self.n_nodes - 1}")
        return node * self.dofs_per_node + self.dof_names.index(name)

    def node_dofs(self, node: int) -> np.ndarray:
        if not 0 <= node < self.n_nodes:
            raise ConfigurationError(f"node {node} outside 0..{self.n_nodes - 1}")
        d = self.dofs_per_node
        return np.arange(node * d, (node + 1) * d)

    def with_voltages(self, Kuv: np.ndarray, Kvv: np.ndarray) -> "FeModel":
        """Copy of the model with replaced electrical matrices."""
        Kuv = np.asarray(Kuv, float).reshape(self.n_dof, -1)
        Kvv = np.asarray(Kvv, float).reshape(Kuv.shape[1], Kuv.shape[1])
        return FeModel(self.coords, self.dof_names, self.M, self.K, Kuv, Kvv,
                       bool(np.any(np.diag(Kvv) <= 0)))


def _eb_mass(l):
    """Consistent Euler-Bernoulli mass pattern for (u1, w1, th1, u2, w2, th2),
    to be scaled by rho*A*l."""
    m = np.zeros((6, 6))
    m[np.ix_([0, 3], [0, 3])] = [[1 / 3, 1 / 6], [1 / 6, 1 / 3]]
    bend = np.array([
        [156.0, 22 * l, 54.0, -13 * l],
        [22 * l, 4 * l**2, 13 * l, -3 * l**2],
        [54.0, 13 * l, 156.0, -22 * l],
        [-13 * l, -3 * l**2, -22 * l, 4 * l**2],
    ]) / 420.0
    m[np.ix_([1, 2, 4, 5], [1, 2, 4, 5])] = bend
    return m


def _eb_stiffness(EA, EI, l):
    k = np.zeros((6, 6))
    k[np.ix_([0, 3], [0, 3])] = EA / l * np.array([[1.0, -1.0], [-1.0, 1.0]])
    bend = EI / l**3 * np.array([
        [12.0, 6 * l, -12.0, 6 * l],
        [6 * l, 4 * l**2, -6 * l, 2 * l**2],
        [-12.0, -6 * l, 12.0, -6 * l],
        [6 * l, 2 * l**2, -6 * l, 4 * l**2],
    ])
    k[np.ix_([1, 2, 4, 5], [1, 2, 4, 5])] = bend
    return k


def beam_element(section: BeamSection) -> ElementMatrices:
    """
    Consistent mass and stiffness of one bare beam element.

    Examples
    --------
    >>> s = BeamSection(0.5, 3, 9.53e-3, 0.03, 2600.0, 60e9)
    >>> e = beam_element(s)
    >>> bool(np.isclose(e.stiffness[1, 1], 12 * s.modulus * s.inertia / s.element_length**3))
    True
    """
    l = section.element_length
    M = section.density * section.area * l * _eb_mass(l)
    K = _eb_stiffness(section.modulus * section.area, section.modulus * section.inertia, l)
    return ElementMatrices(M, K, np.zeros((6, 0)), np.zeros((0, 0)))


def piezo_coupling(beam: BeamSection, piezo: PiezoSection) -> np.ndarray:
    """6x1 electromechanical coupling of one covered element (N/V, N m/V)."""
    a = piezo.d31 * piezo.modulus * piezo.width
    h = piezo.lever_arm(beam)
    return np.array([[-a], [0.0], [-a * h], [a], [0.0], [a * h]])


def piezo_capacitance(beam: BeamSection, piezo: PiezoSection) -> float:
    return (piezo.width * beam.element_length / piezo.thickness) * (
        piezo.eps33 - piezo.d31**2 * piezo.modulus
    )


def piezo_element(beam: BeamSection, piezo: PiezoSection) -> ElementMatrices:
    """
    Beam element with the strip bonded on top: beam and strip mass and
    stiffness are summed, and the element gets one voltage input.

    A non-positive capacitance is kept as computed; a
    :class:`PiezoParameterWarning` is emitted.
    """
    bare = beam_element(beam)
    l = beam.element_length
    M = bare.mass + piezo.density * piezo.area * l * _eb_mass(l)
    K = bare.stiffness + _eb_stiffness(
        piezo.modulus * piezo.area, piezo.modulus * piezo.inertia(beam), l
    )
    kvv = piezo_capacitance(beam, piezo)
    if kvv <= 0:
        warnings.warn(
            f"piezo capacitance per element is non-positive ({kvv:.4g} F): "
            "eps33 < d31**2 * E_p",
            PiezoParameterWarning,
            stacklevel=2,
        )
    return ElementMatrices(M, K, piezo_coupling(beam, piezo), np.array([[kvv]]))


def _node_coords(beam: BeamSection) -> np.ndarray:
    coords = np.zeros((beam.n_elements + 1, 3))
    coords[:, 0] = np.linspace(0.0, beam.length, beam.n_elements + 1)
    return coords


def assemble(
    beam: BeamSection,
    piezo: Optional[PiezoSection] = None,
    topology: Optional[VoltageTopology] = None,
) -> FeModel:
    """
    Assemble global matrices of the beam.

    Overlapping nodal blocks are summed. With a shared topology every
    covered element feeds voltage channel 0; with a per-element topology
    each covered element owns a channel (ascending element order). When
    ``topology`` is None a shared topology over the covered elements is
    used.
    """
    covered = piezo.coverage(beam) if piezo is not None else ()
    if topology is None:
        topology = VoltageTopology.shared(covered)
    if topology.channel_of_element and not covered:
        raise ConfigurationError("voltage topology given but no piezo coverage")
    missing = set(covered) - set(topology.channel_of_element)
    extra = set(topology.channel_of_element) - set(covered)
    if missing or extra:
        raise ConfigurationError(
            f"topology elements {sorted(topology.channel_of_element)} do not "
            f"match coverage {sorted(covered)}"
        )

    n_nodes = beam.n_elements + 1
    ndof = 3 * n_nodes
    nch = topology.n_channels
    M = np.zeros((ndof, ndof))
    K = np.zeros((ndof, ndof))
    Kuv = np.zeros((ndof, nch))
    Kvv = np.zeros((nch, nch))

    bare = beam_element(beam)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PiezoParameterWarning)
        covered_el = piezo_element(beam, piezo) if covered else None
    for e in range(1, beam.n_elements + 1):
        idx = np.arange(3 * (e - 1), 3 * (e + 1))
        el = covered_el if e in topology.channel_of_element else bare
        M[np.ix_(idx, idx)] += el.mass
        K[np.ix_(idx, idx)] += el.stiffness
        if el is covered_el:
            ch = topology.channel_of_element[e]
            Kuv[idx, ch] += el.coupling[:, 0]
            Kvv[ch, ch] += el.capacitance[0, 0]

    nonphysical = bool(nch and np.any(np.diag(Kvv) <= 0))
    if caught:
        warnings.warn(str(caught[0].message), PiezoParameterWarning, stacklevel=2)
    return FeModel(_node_coords(beam), PLANAR_DOFS, M, K, Kuv, Kvv, nonphysical)


def _rect_torsion_constant(a, b):
    """Saint-Venant constant of an a x b rectangle."""
    long, short = max(a, b), min(a, b)
    r = short / long
    return long * short**3 * (1 / 3 - 0.21 * r * (1 - r**4 / 12))


def assemble_spatial(
    beam: BeamSection,
    piezo: Optional[PiezoSection] = None,
    topology: Optional[VoltageTopology] = None,
    poisson: float = 0.3,
) -> FeModel:
    """
    Spatial (6 DOF per node) counterpart of :func:`assemble`.

    Bending in the x-z plane (strip side) reuses the planar element with
    ``ry = -dw/dx``; x-y bending and Saint-Venant torsion are added so the
    model has the six rigid modes of a free body. Node DOFs are
    ``(ux, uy, uz, rx, ry, rz)``.
    """
    planar = assemble(beam, piezo, topology)
    covered = piezo.coverage(beam) if piezo is not None else ()
    l = beam.element_length
    n_nodes = planar.n_nodes
    ndof = 6 * n_nodes
    M = np.zeros((ndof, ndof))
    K = np.zeros((ndof, ndof))
    Kuv = np.zeros((ndof, planar.n_channels))

    # planar (u, w, theta) -> spatial (ux, uz, -ry)
    sel = []
    for node in range(n_nodes):
        sel += [6 * node + 0, 6 * node + 2, 6 * node + 4]
    sel = np.array(sel)
    sign = np.tile([1.0, 1.0, -1.0], n_nodes)
    M[np.ix_(sel, sel)] = planar.M * np.outer(sign, sign)
    K[np.ix_(sel, sel)] = planar.K * np.outer(sign, sign)
    Kuv[sel, :] = planar.Kuv * sign[:, None]

    G = beam.modulus / (2 * (1 + poisson))
    J = _rect_torsion_constant(beam.width, beam.thickness)
    Iz = beam.thickness * beam.width**3 / 12.0
    for e in range(1, beam.n_elements + 1):
        rho_a = beam.density * beam.area
        EIz = beam.modulus * Iz
        polar = beam.density * (beam.inertia + Iz)
        if e in covered:
            rho_a += piezo.density * piezo.area
            EIz += piezo.modulus * piezo.thickness * piezo.width**3 / 12.0
            polar += piezo.density * piezo.area * (piezo.width**2 + piezo.thickness**2) / 12.0
        base = 6 * (e - 1)
        # x-y bending: (uy, rz) with rz = duy/dx
        idx = np.array([base + 1, base + 5, base + 7, base + 11])
        full = [0, 1, 2, 3, 4, 5]
        mb = _eb_mass(l)[np.ix_(full[1:3] + full[4:6], full[1:3] + full[4:6])]
        kb = _eb_stiffness(1.0, EIz, l)[np.ix_([1, 2, 4, 5], [1, 2, 4, 5])]
        M[np.ix_(idx, idx)] += rho_a * l * mb
        K[np.ix_(idx, idx)] += kb
        # torsion: (rx1, rx2)
        idx = np.array([base + 3, base + 9])
        K[np.ix_(idx, idx)] += G * J / l * np.array([[1.0, -1.0], [-1.0, 1.0]])
        M[np.ix_(idx, idx)] += polar * l * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])

    return FeModel(planar.coords, SPATIAL_DOFS, M, K, Kuv, planar.Kvv.copy(),
                   planar.nonphysical_capacitance)


def clamp_dofs(model: FeModel, nodes: Sequence[int]) -> np.ndarray:
    """All DOF indices of the given nodes."""
    if len(nodes) == 0:
        return np.zeros(0, int)
    return np.concatenate([model.node_dofs(n) for n in nodes])


def free_dofs(model: FeModel, clamped: Iterable[int]) -> np.ndarray:
    mask = np.ones(model.n_dof, bool)
    mask[np.asarray(list(clamped), int)] = False
    return np.flatnonzero(mask)


def static_solve(model: FeModel, clamped_dofs, loads=None, voltages=None):
    """
    Static response with the given DOFs held at zero.

    Returns
    -------
    u : 1d ndarray
        Displacements (zero on clamped DOFs).
    g : 1d ndarray
        Electrode charges ``K_vu u + K_vv v``.
    """
    F = np.zeros(model.n_dof) if loads is None else np.asarray(loads, float)
    v = np.zeros(model.n_channels) if voltages is None else np.asarray(voltages, float)
    if F.shape != (model.n_dof,) or v.shape != (model.n_channels,):
        raise ConfigurationError("load or voltage vector has the wrong length")
    f = free_dofs(model, clamped_dofs)
    Kff = model.K[np.ix_(f, f)]
    rhs = F[f] - model.Kuv[f] @ v
    try:
        c, low = la.cho_factor(Kff)
        uf = la.cho_solve((c, low), rhs)
    except la.LinAlgError:
        raise BoundaryConditionError(
            "reduced stiffness is singular; clamp enough DOFs to remove rigid modes"
        ) from None
    u = np.zeros(model.n_dof)
    u[f] = uf
    g = model.Kvu @ u + model.Kvv @ v
    return u, g
