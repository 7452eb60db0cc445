"""
Craig-Bampton style component modes synthesis with two connection points.

DOFs of the FE model are split into the rigid set ``r`` (all DOFs of the
parent connection node P), the redundant boundary set ``c`` (all DOFs of the
child connection node Q) and the interior set ``n``. Physical coordinates
are mapped to component-mode coordinates by::

    [u_n]   [phi_nn  phi_nc  phi_nr] [eta_n]
    [u_c] = [  0       I     phi_cr] [eta_c]
    [u_r]   [  0       0       I   ] [eta_r]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError, ModelError, NumericalError
from .fe_piezo_beam import FeModel

ZERO_PATTERN_TOL = 1e-8


@dataclass(frozen=True)
class Partition:
    r: np.ndarray
    c: np.ndarray
    n: np.ndarray
    node_P: int
    node_Q: int

    @property
    def order(self) -> np.ndarray:
        """Physical DOF indices in (n, c, r) order."""
        return np.concatenate([self.n, self.c, self.r])


def partition(model: FeModel, node_P: int = 0, node_Q: Optional[int] = None) -> Partition:
    if node_Q is None:
        node_Q = model.n_nodes - 1
    if node_P == node_Q:
        raise ConfigurationError("connection points P and Q must differ")
    r = model.node_dofs(node_P)
    c = model.node_dofs(node_Q)
    mask = np.ones(model.n_dof, bool)
    mask[r] = False
    mask[c] = False
    return Partition(r, c, np.flatnonzero(mask), node_P, node_Q)


def _skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rigid_transport(offset, dofs_per_node: int = 3) -> np.ndarray:
    """
    Kinematic map from the rigid motion of P to the DOFs of a node located
    at ``offset`` (x, y, z) from P.

    >>> rigid_transport([0.5, 0, 0])
    array([[1. , 0. , 0. ],
           [0. , 1. , 0.5],
           [0. , 0. , 1. ]])
    """
    dx, dy, dz = (list(offset) + [0.0, 0.0])[:3]
    if dofs_per_node == 3:
        # planar (u, w, theta) with theta = dw/dx
        return np.array([[1.0, 0.0, -dz], [0.0, 1.0, dx], [0.0, 0.0, 1.0]])
    if dofs_per_node == 6:
        T = np.eye(6)
        T[:3, 3:] = -_skew([dx, dy, dz])
        return T
    raise ConfigurationError(f"unsupported dofs per node: {dofs_per_node}")


def rigid_body_shapes(model: FeModel, node_P: int) -> np.ndarray:
    """n_dof x d matrix whose columns are the rigid motions of node P."""
    d = model.dofs_per_node
    R = np.zeros((model.n_dof, d))
    origin = model.coords[node_P]
    for node in range(model.n_nodes):
        R[model.node_dofs(node)] = rigid_transport(model.coords[node] - origin, d)
    return R


def constraint_modes(K_nn: np.ndarray, K_nc: np.ndarray) -> np.ndarray:
    """Static interior response to unit boundary displacements."""
    if K_nc.size == 0 or not np.any(K_nc):
        return np.zeros_like(K_nc, dtype=float)
    try:
        factor = la.cho_factor(K_nn)
    except la.LinAlgError:
        raise ModelError("K_nn is singular: component is under-constrained") from None
    return -la.cho_solve(factor, K_nc)


def fixed_interface_modes(K_nn: np.ndarray, M_nn: np.ndarray, m_retain: Optional[int] = None):
    """
    Mass-normalized modes of the component clamped at P and Q.

    Returns
    -------
    phi : 2d ndarray
        ``|n| x m_retain`` mode shapes, ascending frequency.
    omega : 1d ndarray
        Circular frequencies (rad/s).
    """
    nn = K_nn.shape[0]
    if m_retain is None:
        m_retain = nn
    if not 1 <= m_retain <= nn:
        raise ConfigurationError(f"m_retain must lie in 1..{nn}, got {m_retain}")
    try:
        lam, phi = la.eigh(K_nn, M_nn, subset_by_index=[0, m_retain - 1])
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalError(f"fixed-interface eigen solve failed: {exc}") from None
    if np.any(lam < -1e-9 * np.abs(lam).max()):
        raise NumericalError("negative fixed-interface eigenvalue")
    lam = np.clip(lam, 0.0, None)
    # deterministic sign: largest-magnitude entry positive
    pivot = np.argmax(np.abs(phi), axis=0)
    phi = phi * np.sign(phi[pivot, np.arange(phi.shape[1])])
    return phi, np.sqrt(lam)


@dataclass(frozen=True)
class CmsBasis:
    partition: Partition
    phi_nn: np.ndarray
    phi_nc: np.ndarray
    phi_nr: np.ndarray
    phi_cr: np.ndarray
    omega: np.ndarray

    @property
    def m(self) -> int:
        return self.phi_nn.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """Full basis, rows and columns in (n, c, r) order."""
        nn, nc, nr = len(self.partition.n), len(self.partition.c), len(self.partition.r)
        m = self.m
        Phi = np.zeros((nn + nc + nr, m + nc + nr))
        Phi[:nn, :m] = self.phi_nn
        Phi[:nn, m:m + nc] = self.phi_nc
        Phi[:nn, m + nc:] = self.phi_nr
        Phi[nn:nn + nc, m:m + nc] = np.eye(nc)
        Phi[nn:nn + nc, m + nc:] = self.phi_cr
        Phi[nn + nc:, m + nc:] = np.eye(nr)
        return Phi

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix))


def component_basis(model: FeModel, part: Partition, m_retain: Optional[int] = None) -> CmsBasis:
    n, c = part.n, part.c
    M, K = model.M, model.K
    phi_nn, omega = fixed_interface_modes(K[np.ix_(n, n)], M[np.ix_(n, n)], m_retain)
    phi_nc = constraint_modes(K[np.ix_(n, n)], K[np.ix_(n, c)])
    R = rigid_body_shapes(model, part.node_P)
    return CmsBasis(part, phi_nn, phi_nc, R[n], R[c], omega)


@dataclass(frozen=True)
class CmsModel:
    """
    Component-mode matrices. ``M``, ``K`` and ``Kv`` are indexed by the
    generalized coordinates (eta_n, eta_c, eta_r); ``Kvv`` is the blocked
    capacitance carried over unchanged.
    """

    basis: CmsBasis
    M: np.ndarray
    K: np.ndarray
    Kv: np.ndarray
    Kvv: np.ndarray

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def nc(self) -> int:
        return len(self.basis.partition.c)

    @property
    def nr(self) -> int:
        return len(self.basis.partition.r)

    @property
    def nv(self) -> int:
        return self.Kv.shape[1]

    @property
    def omega(self) -> np.ndarray:
        return self.basis.omega

    @property
    def phi_cr(self) -> np.ndarray:
        return self.basis.phi_cr

    def slices(self):
        m, nc = self.m, self.nc
        return slice(0, m), slice(m, m + nc), slice(m + nc, m + nc + self.nr)

    def block(self, mat: str, rows: str, cols: str) -> np.ndarray:
        """Block of ``M``/``K`` (e.g. ``block('M', 'r', 'n')``)."""
        s = dict(zip("ncr", self.slices()))
        return getattr(self, mat)[s[rows], s[cols]]

    def coupling(self, rows: str) -> np.ndarray:
        s = dict(zip("ncr", self.slices()))
        return self.Kv[s[rows]]


def transform(model: FeModel, basis: CmsBasis, check: bool = True) -> CmsModel:
    """
    Project the FE model on the component-mode basis.

    The transformed stiffness must be block diagonal in (n, c) with a zero
    rigid block; a violation beyond ``ZERO_PATTERN_TOL * ||K||`` means the
    basis is invalid and raises :class:`NumericalError`.
    """
    order = basis.partition.order
    Phi = basis.matrix
    M = model.M[np.ix_(order, order)]
    K = model.K[np.ix_(order, order)]
    Mh = Phi.T @ M @ Phi
    Kh = Phi.T @ K @ Phi
    Mh = 0.5 * (Mh + Mh.T)
    Kh = 0.5 * (Kh + Kh.T)
    Kv = Phi.T @ model.Kuv[order]
    cms = CmsModel(basis, Mh, Kh, Kv, model.Kvv.copy())
    if check:
        tol = ZERO_PATTERN_TOL * np.abs(model.K).max()
        for rows, cols in (("n", "c"), ("n", "r"), ("c", "r"), ("r", "r")):
            err = np.abs(cms.block("K", rows, cols)).max(initial=0.0)
            if err > tol:
                raise NumericalError(
                    f"invalid basis: K_hat[{rows}{cols}] = {err:.3e} exceeds {tol:.3e}"
                )
    return cms


def reduce(model: FeModel, node_P: int = 0, node_Q: Optional[int] = None,
           m_retain: Optional[int] = None) -> CmsModel:
    """Partition, build the basis and transform in one call."""
    part = partition(model, node_P, node_Q)
    return transform(model, component_basis(model, part, m_retain))
