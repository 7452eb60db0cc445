"""
Actuated two-input two-output port (TITOP) state-space block.

Inputs, in order: load received at Q from the child ``F_Q`` (c channels),
acceleration imposed at P by the parent ``acc_P`` (r channels) and the
electrode voltages ``v``. Outputs: acceleration of Q ``acc_Q``, load applied
by the component on the parent at P ``F_P`` and the electrode charges ``g``.
States are ``(eta_n, eta_c, eta_n', eta_c')``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from .cms import CmsModel
from .errors import ConfigurationError, ModelError, ParameterError
from .ports import PortSystem, sort_poles

DEFAULT_ZETA = 0.001


@dataclass(frozen=True)
class DampingSpec:
    """
    Modal damping of the clamped-clamped modes and of the boundary block.

    ``zeta`` applies to the boundary (c) block and, when ``per_mode`` is
    None, to every retained interior mode.
    """

    zeta: float = DEFAULT_ZETA
    per_mode: Optional[tuple] = None

    def __post_init__(self):
        values = [self.zeta] + list(self.per_mode or ())
        for z in values:
            if not 0.0 <= z < 1.0:
                raise ParameterError(f"damping ratio must satisfy 0 <= zeta < 1, got {z}")
        if self.per_mode is not None:
            object.__setattr__(self, "per_mode", tuple(float(z) for z in self.per_mode))

    @classmethod
    def none(cls) -> "DampingSpec":
        return cls(0.0)

    @classmethod
    def uniform(cls, zeta: float) -> "DampingSpec":
        return cls(float(zeta))

    @property
    def mode(self) -> str:
        if self.per_mode is not None:
            return "per_mode"
        return "none" if self.zeta == 0 else "uniform_zeta"

    def interior(self, omega: np.ndarray) -> np.ndarray:
        if self.per_mode is None:
            z = np.full(len(omega), self.zeta)
        else:
            if len(self.per_mode) < len(omega):
                raise ConfigurationError(
                    f"{len(self.per_mode)} damping ratios for {len(omega)} retained modes"
                )
            z = np.array(self.per_mode[:len(omega)])
        return np.diag(2.0 * z * omega)

    def boundary(self, K_cc: np.ndarray, M_cc: np.ndarray) -> np.ndarray:
        if self.zeta == 0 or K_cc.size == 0:
            return np.zeros_like(K_cc)
        lam, psi = la.eigh(K_cc, M_cc)
        w = np.sqrt(np.clip(lam, 0.0, None))
        Mpsi = M_cc @ psi
        return Mpsi @ np.diag(2.0 * self.zeta * w) @ Mpsi.T


def port_labels(name: str, dof_names: Sequence[str], nv: int):
    """Input and output labels of a TITOP block."""
    inputs = (tuple(f"{name}.F_Q.{d}" for d in dof_names)
              + tuple(f"{name}.acc_P.{d}" for d in dof_names)
              + tuple(f"{name}.v.{k}" for k in range(nv)))
    outputs = (tuple(f"{name}.acc_Q.{d}" for d in dof_names)
               + tuple(f"{name}.F_P.{d}" for d in dof_names)
               + tuple(f"{name}.g.{k}" for k in range(nv)))
    return inputs, outputs


@dataclass(frozen=True)
class TitopModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    D_delta: np.ndarray
    cms: CmsModel
    damping: DampingSpec
    inputs: tuple
    outputs: tuple
    states: tuple
    name: str = "A"

    def __post_init__(self):
        m, nc, nr, nv = self.cms.m, self.cms.nc, self.cms.nr, self.cms.nv
        nx = 2 * (m + nc)
        nu, ny = nc + nr + nv, nc + nr + nv
        expected = {"A": (nx, nx), "B": (nx, nu), "C": (ny, nx), "D": (ny, nu),
                    "D_delta": (ny, nu)}
        for key, shape in expected.items():
            if getattr(self, key).shape != shape:
                raise ModelError(f"{key} has shape {getattr(self, key).shape}, expected {shape}")
        if len(self.inputs) != nu or len(self.outputs) != ny or len(self.states) != nx:
            raise ModelError("port record does not match matrix dimensions")

    @property
    def ports(self) -> dict:
        c = self.cms
        return {"loads_in": c.nc, "accel_in": c.nr, "voltage_in": c.nv,
                "accel_out": c.nc, "loads_out": c.nr, "charge_out": c.nv}

    @property
    def system(self) -> PortSystem:
        return PortSystem(self.A, self.B, self.C, self.D + self.D_delta,
                          self.inputs, self.outputs, self.states)

    def transfer_at(self, omega: float) -> np.ndarray:
        return self.system.transfer_at(omega)

    def poles(self) -> np.ndarray:
        return poles(self)


def build_titop(cms: CmsModel, damping: Optional[DampingSpec] = None,
                name: str = "A", dof_names: Optional[Sequence[str]] = None) -> TitopModel:
    """
    Cast the component-mode model into the double-port state-space block.

    The load row follows ``F_P = -F_r`` where ``F_r`` is the load applied on
    the component at P; in the rigid limit this gives
    ``F_P = phi_cr.T F_Q - M_rr acc_P``.
    """
    if damping is None:
        damping = DampingSpec()
    n, c, r = cms.slices()
    m, nc, nr, nv = cms.m, cms.nc, cms.nr, cms.nv
    q = m + nc
    if dof_names is None:
        dof_names = tuple(str(i) for i in range(nc))

    MQ = cms.M[:q, :q]
    KQ = np.zeros((q, q))
    KQ[n, n] = cms.K[n, n]
    KQ[c, c] = cms.K[c, c]
    DQ = np.zeros((q, q))
    DQ[n, n] = damping.interior(cms.omega)
    DQ[c, c] = damping.boundary(cms.K[c, c], cms.M[c, c])

    try:
        factor = la.cho_factor(MQ)
    except la.LinAlgError:
        raise ModelError("M_Q is singular") from None
    MinvK = la.cho_solve(factor, KQ)
    MinvD = la.cho_solve(factor, DQ)

    Btil = np.zeros((q, nc + nr + nv))
    Btil[c, :nc] = np.eye(nc)
    Btil[:, nc:nc + nr] = -cms.M[:q, r]
    Btil[:, nc + nr:] = -cms.Kv[:q]
    MinvB = la.cho_solve(factor, Btil)

    A = np.block([[np.zeros((q, q)), np.eye(q)], [-MinvK, -MinvD]])
    B = np.vstack([np.zeros((q, nc + nr + nv)), MinvB])

    sel_c = np.zeros((nc, q))
    sel_c[:, c] = np.eye(nc)
    M_rQ = cms.M[r, :q]
    K_vQ = cms.Kv[:q].T

    C = np.vstack([
        sel_c @ np.hstack([-MinvK, -MinvD]),
        M_rQ @ np.hstack([MinvK, MinvD]),
        np.hstack([K_vQ, np.zeros((nv, q))]),
    ])
    D = np.vstack([
        sel_c @ MinvB,
        -M_rQ @ MinvB,
        np.hstack([np.zeros((nv, nc + nr)), cms.Kvv]),
    ])
    phi_cr = cms.phi_cr
    D_delta = np.zeros_like(D)
    D_delta[:nc, nc:nc + nr] = phi_cr
    D_delta[nc:nc + nr, :nc] = phi_cr.T
    D_delta[nc:nc + nr, nc:nc + nr] = -cms.M[r, r]
    D_delta[nc:nc + nr, nc + nr:] = -cms.Kv[r]

    inputs, outputs = port_labels(name, dof_names, nv)
    states = (tuple(f"{name}.eta_n.{i}" for i in range(m))
              + tuple(f"{name}.eta_c.{d}" for d in dof_names)
              + tuple(f"{name}.deta_n.{i}" for i in range(m))
              + tuple(f"{name}.deta_c.{d}" for d in dof_names))
    return TitopModel(A, B, C, D, D_delta, cms, damping, inputs, outputs, states, name)


def poles(model: TitopModel) -> np.ndarray:
    return sort_poles(np.linalg.eigvals(model.A))


def transfer_at(model: TitopModel, omega: float) -> np.ndarray:
    return model.transfer_at(omega)


def component(model, name: str = "A", damping: Optional[DampingSpec] = None,
              m_retain: Optional[int] = None, node_P: int = 0,
              node_Q: Optional[int] = None) -> TitopModel:
    """FE model -> component modes -> TITOP block, with labeled ports."""
    from .cms import reduce

    cms = reduce(model, node_P, node_Q, m_retain)
    return build_titop(cms, damping, name=name, dof_names=model.dof_names)
