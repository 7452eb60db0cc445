"""
Numerical experiments on FE models and port systems: modal frequencies,
frequency responses, root-locus sweeps and time simulation, plus a
Newmark integration of the physical FE equations used as an independent
time-domain oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, IllPosedInterconnectionError, NumericalError
from .fe_piezo_beam import FeModel, clamp_dofs, free_dofs
from .ports import PortSystem, SingularSampleError

BOUNDARIES = ("clamped-free", "clamped-clamped", "free-free")


# -- modal analysis ---------------------------------------------------------

def _clamped_nodes(model: FeModel, boundary) -> list:
    if isinstance(boundary, str):
        if boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES} or a node list")
        return {"clamped-free": [0],
                "clamped-clamped": [0, model.n_nodes - 1],
                "free-free": []}[boundary]
    return list(boundary)


def modal_frequencies(model: FeModel, boundary="clamped-free") -> np.ndarray:
    """
    Natural frequencies (Hz, ascending) with the nodes named by
    ``boundary`` clamped. Rigid modes of unconstrained models come first
    as (numerically) zero frequencies.
    """
    f = free_dofs(model, clamp_dofs(model, _clamped_nodes(model, boundary)))
    try:
        lam = la.eigh(model.K[np.ix_(f, f)], model.M[np.ix_(f, f)], eigvals_only=True)
    except la.LinAlgError as exc:
        raise NumericalError(f"modal solve failed: {exc}") from None
    return np.sqrt(np.clip(lam, 0.0, None)) / (2 * np.pi)


def damping_ratio(p) -> np.ndarray:
    p = np.asarray(p, complex)
    mag = np.abs(p)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mag > 0, -p.real / np.where(mag > 0, mag, 1.0), 1.0)


# -- frequency response -----------------------------------------------------

@dataclass(frozen=True)
class FreqResponse:
    omega: np.ndarray
    pairs: tuple
    samples: np.ndarray
    skipped: np.ndarray

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.samples))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.samples))

    def pair(self, output: str, input: str) -> np.ndarray:
        return self.samples[:, self.pairs.index((output, input))]


def frequency_grid(omega_min, omega_max, points, spacing="log") -> np.ndarray:
    if points < 2 or omega_max <= omega_min:
        raise ConfigurationError("need points >= 2 and omega_max > omega_min")
    if spacing == "log":
        if omega_min <= 0:
            raise ConfigurationError("log spacing needs omega_min > 0")
        return np.logspace(np.log10(omega_min), np.log10(omega_max), points)
    if spacing == "linear":
        if omega_min < 0:
            raise ConfigurationError("omega must be non-negative")
        return np.linspace(omega_min, omega_max, points)
    raise ConfigurationError(f"spacing must be 'log' or 'linear', got {spacing!r}")


def bode(system: PortSystem, pairs: Optional[Sequence[tuple]] = None,
         omega_min: float = 1.0, omega_max: float = 1e4, points: int = 400,
         spacing: str = "log", omega: Optional[np.ndarray] = None) -> FreqResponse:
    """
    Sample ``G(j omega)`` for (output, input) label pairs. Samples falling
    on an undamped pole are skipped (NaN) and flagged.
    """
    if pairs is None:
        pairs = [(y, u) for y in system.outputs for u in system.inputs]
    pairs = tuple((str(y), str(u)) for y, u in pairs)
    iy = system.output_index([y for y, _ in pairs])
    iu = system.input_index([u for _, u in pairs])
    if omega is None:
        omega = frequency_grid(omega_min, omega_max, points, spacing)
    omega = np.asarray(omega, float)
    if np.any(np.diff(omega) <= 0):
        raise ConfigurationError("frequency grid must be strictly increasing")
    samples = np.full((len(omega), len(pairs)), np.nan + 0j)
    skipped = np.zeros(len(omega), bool)
    for k, w in enumerate(omega):
        try:
            G = system.transfer_at(w)
        except SingularSampleError:
            skipped[k] = True
            continue
        samples[k] = G[iy, iu]
    return FreqResponse(omega, pairs, samples, skipped)


# -- root locus -------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    gains: np.ndarray
    poles: np.ndarray          # (n_gain, n_poles), columns are tracked branches
    mode1_branch: int
    mode1_zeta: np.ndarray
    min_zeta: np.ndarray
    stable: np.ndarray
    ill_posed: np.ndarray
    overlap: np.ndarray        # eigenvector overlap of the mode-1 branch between steps
    best_index: int
    best_stable_index: Optional[int] = None

    @property
    def best_gain(self) -> float:
        return float(self.gains[self.best_index])

    @property
    def best_zeta(self) -> float:
        return float(self.mode1_zeta[self.best_index])

    @property
    def best_stable_gain(self) -> Optional[float]:
        i = self.best_stable_index
        return None if i is None else float(self.gains[i])

    @property
    def best_stable_zeta(self) -> Optional[float]:
        i = self.best_stable_index
        return None if i is None else float(self.mode1_zeta[i])

    @property
    def mode1_poles(self) -> np.ndarray:
        return self.poles[:, self.mode1_branch]

    @property
    def zeta_range(self) -> tuple:
        z = self.mode1_zeta[~self.ill_posed]
        return float(np.nanmin(z)), float(np.nanmax(z))


def _mode1_index(p: np.ndarray) -> int:
    scale = np.abs(p).max(initial=1.0)
    cand = np.flatnonzero((p.imag > 1e-9 * scale) & (np.abs(p) > 1e-9 * scale))
    if not len(cand):
        raise NumericalError("no oscillatory pole to track")
    return int(cand[np.argmin(np.abs(p[cand]))])


def _overlap(v1, v2) -> float:
    return float(abs(np.vdot(v1, v2)) / (np.linalg.norm(v1) * np.linalg.norm(v2)))


def root_locus(builder: Callable[[float], PortSystem], gains: Sequence[float]) -> SweepResult:
    """
    Closed-loop eigenvalues over a gain grid.

    Poles are matched between consecutive gains by minimum-distance
    assignment so each column of ``poles`` is one continuous branch. The
    mode-1 branch starts at the lowest-frequency oscillatory pole of the
    first gain. ``best_index`` maximizes mode-1 damping over the whole grid
    regardless of the other branches; ``best_stable_index`` restricts the
    search to gains whose closed loop is stable (None if there is none).
    """
    gains = np.asarray(gains, float)
    if gains.size == 0 or np.any(gains < 0):
        raise ConfigurationError("gain grid must be non-empty and non-negative")
    if np.any(np.diff(gains) <= 0):
        raise ConfigurationError("gain grid must be strictly increasing")

    sets, vecs = [], []
    ill = np.zeros(len(gains), bool)
    n = None
    for k, K in enumerate(gains):
        try:
            sys = builder(float(K))
            w, V = np.linalg.eig(sys.A)
            n = len(w)
        except IllPosedInterconnectionError:
            ill[k] = True
            w, V = None, None
        sets.append(w)
        vecs.append(V)
    if n is None:
        raise IllPosedInterconnectionError("every gain of the sweep is ill-posed")

    poles = np.full((len(gains), n), np.nan + 0j)
    overlap = np.full(len(gains), np.nan)
    prev = prev_vec = None
    branch = None
    for k in range(len(gains)):
        w, V = sets[k], vecs[k]
        if w is None:
            continue
        if prev is None:
            order = np.argsort(np.abs(w) + 1e-12 * np.angle(w))
            poles[k] = w[order]
            branch = _mode1_index(poles[k])
            prev_vec = V[:, order[branch]]
        else:
            cost = np.abs(prev[:, None] - w[None, :])
            _, cols = linear_sum_assignment(cost)
            poles[k] = w[cols]
            vec = V[:, cols[branch]]
            overlap[k] = _overlap(prev_vec, vec)
            prev_vec = vec
        prev = poles[k]

    zeta = damping_ratio(poles)
    mode1 = zeta[:, branch]
    scale = np.nanmax(np.abs(poles))
    nonzero = np.abs(poles) > 1e-9 * scale
    min_zeta = np.array([np.nanmin(z[nz]) if np.any(nz) else np.nan
                         for z, nz in zip(zeta, nonzero)])
    stable = np.array([not bad and np.nanmax(p.real[nz]) < 1e-9 * scale
                       for p, nz, bad in zip(poles, nonzero, ill)])
    mode1[ill] = np.nan
    best = int(np.nanargmax(mode1))
    best_stable = None
    if np.any(stable):
        best_stable = int(np.argmax(np.where(stable, mode1, -np.inf)))
    return SweepResult(gains, poles, branch, mode1, min_zeta, stable, ill, overlap,
                       best, best_stable)


def mode1_loop_gain(plant: PortSystem, sensor: str, actuator: str) -> float:
    """
    Rate-feedback gain at which the isolated mode-1 loop reaches unit gain.

    With ``r`` the residue of the sensor/actuator transfer at the mode-1
    pole, integrated acceleration feedback on that single mode gives
    ``zeta ~ K |2 r| / (2 omega)``; the returned gain is ``omega / |2 r|``.
    """
    sub = plant.select(inputs=[actuator], outputs=[sensor])
    w, V = np.linalg.eig(sub.A)
    k = _mode1_index(w)
    left = np.linalg.inv(V)
    residue = (sub.C @ V[:, k]) * (left[k] @ sub.B)
    # integrated acceleration: divide the acceleration residue by the pole
    r = complex(residue[0, 0] / w[k]) if np.ndim(residue) == 2 else complex(residue[0] / w[k])
    if r == 0:
        raise NumericalError("mode 1 is not controllable/observable from the chosen ports")
    return float(abs(w[k]) / abs(2 * r))


def default_gain_grid(plant: PortSystem, sensor: str, actuator: str,
                      points: int = 60, decades: float = 4.0) -> np.ndarray:
    k_ref = mode1_loop_gain(plant, sensor, actuator)
    half = decades / 2.0
    return k_ref * np.logspace(-half, half, points)


# -- time simulation --------------------------------------------------------

SIGNAL_KINDS = ("impulse", "step", "sine_burst", "table")


@dataclass(frozen=True)
class Signal:
    """
    Input profile applied to one input channel.

    ``sine_burst`` uses ``frequency`` (Hz) and ``cycles``; ``table`` holds
    ``(times, values)`` and is held constant between samples.
    """

    channel: str
    kind: str = "step"
    amplitude: float = 1.0
    frequency: float = 0.0
    cycles: float = 1.0
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ConfigurationError(f"signal kind must be one of {SIGNAL_KINDS}")
        if self.kind == "sine_burst" and self.frequency <= 0:
            raise ConfigurationError("sine_burst needs a positive frequency")
        if self.kind == "table":
            if self.table is None:
                raise ConfigurationError("table signal needs (times, values)")
            t, v = (np.asarray(a, float) for a in self.table)
            if t.shape != v.shape or t.ndim != 1 or np.any(np.diff(t) <= 0):
                raise ConfigurationError("table times must be increasing and match values")

    def sample(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "impulse":
            return np.zeros_like(t)
        if self.kind == "step":
            return np.full_like(t, self.amplitude)
        if self.kind == "sine_burst":
            on = t < self.cycles / self.frequency
            return np.where(on, self.amplitude * np.sin(2 * np.pi * self.frequency * t), 0.0)
        times, values = (np.asarray(a, float) for a in self.table)
        idx = np.searchsorted(times, t, side="right") - 1
        return np.where(idx >= 0, self.amplitude * values[np.clip(idx, 0, None)], 0.0)


@dataclass(frozen=True)
class TimeResponse:
    t: np.ndarray
    inputs: tuple
    u: np.ndarray
    outputs: tuple
    y: np.ndarray
    states: Optional[tuple] = None

    def output(self, label: str) -> np.ndarray:
        return self.y[:, self.outputs.index(label)]


def _input_matrix(labels: Sequence[str], signals: Sequence[Signal], t: np.ndarray):
    u = np.zeros((len(t), len(labels)))
    impulse = np.zeros(len(labels))
    pos = {name: i for i, name in enumerate(labels)}
    for s in signals:
        if s.channel not in pos:
            raise ConfigurationError(f"unknown input port {s.channel!r}")
        if s.kind == "impulse":
            impulse[pos[s.channel]] += s.amplitude
        else:
            u[:, pos[s.channel]] += s.sample(t)
    return u, impulse


def default_time_step(system: PortSystem) -> float:
    """``1 / (50 f_max)`` over the system poles."""
    p = system.poles()
    fmax = np.abs(p).max(initial=0.0) / (2 * np.pi)
    if fmax == 0:
        raise ConfigurationError("cannot derive a time step from a static system")
    return 1.0 / (50.0 * fmax)


def zoh_discretize(A: np.ndarray, B: np.ndarray, dt: float):
    """Exact zero-order-hold discretization through the augmented exponential."""
    nx, nu = B.shape
    aug = np.zeros((nx + nu, nx + nu))
    aug[:nx, :nx] = A
    aug[:nx, nx:] = B
    E = la.expm(aug * dt)
    return E[:nx, :nx], E[:nx, nx:]


def simulate(system: PortSystem, signals: Sequence[Signal], t_end: float,
             dt: Optional[float] = None, x0: Optional[np.ndarray] = None) -> TimeResponse:
    """
    Time response under zero-order-hold inputs, exact for piecewise-constant
    inputs. Impulses act as an initial state jump ``B u``; their Dirac part
    in the outputs is not represented. Raises :class:`NumericalError` if the
    state leaves the floating-point range (unstable system).
    """
    if isinstance(signals, Signal):
        signals = [signals]
    if dt is None:
        dt = default_time_step(system)
    if dt <= 0 or t_end <= 0:
        raise ConfigurationError("dt and t_end must be positive")
    nt = int(round(t_end / dt)) + 1
    t = dt * np.arange(nt)
    u, impulse = _input_matrix(system.inputs, signals, t)
    x = np.zeros(system.n_states) if x0 is None else np.asarray(x0, float).copy()
    if x.shape != (system.n_states,):
        raise ConfigurationError("x0 has the wrong length")
    x = x + system.B @ impulse
    Ad, Bd = zoh_discretize(system.A, system.B, dt)
    X = np.empty((nt, system.n_states))
    Bu = u @ Bd.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nt):
            X[k] = x
            x = Ad @ x + Bu[k]
            if k % 1024 == 0 and not np.all(np.isfinite(x)):
                raise NumericalError(f"simulation diverged at t = {t[k]:.6g} s")
    if not np.all(np.isfinite(X)):
        raise NumericalError("simulation diverged")
    y = X @ system.C.T + u @ system.D.T
    return TimeResponse(t, system.inputs, u, system.outputs, y)


def time_to_fraction(t: np.ndarray, y: np.ndarray, fraction: float = 0.1) -> float:
    """Last time at which ``|y|`` is at least ``fraction`` of its peak."""
    a = np.abs(np.asarray(y))
    peak = a.max(initial=0.0)
    if peak == 0:
        return 0.0
    return float(t[np.flatnonzero(a >= fraction * peak)[-1]])


# -- Newmark oracle ---------------------------------------------------------

def physical_damping(titop) -> np.ndarray:
    """
    Damping matrix on the free DOFs (P clamped, ascending DOF order)
    equivalent to the modal damping of a fully retained TITOP block.
    """
    basis = titop.cms.basis
    part = basis.partition
    if basis.m != len(part.n):
        raise ConfigurationError("physical damping needs full mode retention")
    q = basis.m + len(part.c)
    Phi_Q = basis.matrix[:q, :q]
    DQ = -titop.cms.M[:q, :q] @ titop.A[q:, q:]
    inv = np.linalg.inv(Phi_Q)
    C = inv.T @ DQ @ inv
    order = np.argsort(np.concatenate([part.n, part.c]))
    C = C[np.ix_(order, order)]
    return 0.5 * (C + C.T)


def fe_time_oracle(model: FeModel, signals: Sequence[Signal], t_end: float, dt: float,
                   clamped_node: int = 0, tip_node: Optional[int] = None,
                   damping: Optional[np.ndarray] = None, name: str = "A",
                   u0: Optional[np.ndarray] = None, beta: float = 0.25,
                   gamma: float = 0.5) -> TimeResponse:
    """
    Newmark integration of the FE equations with the P node clamped.

    Inputs use TITOP labels (``{name}.v.k`` voltages, ``{name}.F_Q.d`` tip
    loads) and outputs mirror the TITOP block: tip accelerations, the load
    applied on the parent at P and the charges. ``damping`` is a matrix on
    the free DOFs in ascending DOF order. ``u0`` is an initial displacement
    of the free DOFs.
    """
    if isinstance(signals, Signal):
        signals = [signals]
    if tip_node is None:
        tip_node = model.n_nodes - 1
    dnames = model.dof_names
    r = model.node_dofs(clamped_node)
    f = free_dofs(model, r)
    tipd = model.node_dofs(tip_node)
    inputs = (tuple(f"{name}.F_Q.{d}" for d in dnames)
              + tuple(f"{name}.v.{k}" for k in range(model.n_channels)))
    outputs = (tuple(f"{name}.acc_Q.{d}" for d in dnames)
               + tuple(f"{name}.F_P.{d}" for d in dnames)
               + tuple(f"{name}.g.{k}" for k in range(model.n_channels)))
    if any(s.kind == "impulse" for s in signals):
        raise ConfigurationError("the Newmark oracle does not take impulses")
    nt = int(round(t_end / dt)) + 1
    t = dt * np.arange(nt)
    u_in, _ = _input_matrix(inputs, signals, t)
    nd = len(dnames)
    F_Q, v = u_in[:, :nd], u_in[:, nd:]

    M = model.M[np.ix_(f, f)]
    K = model.K[np.ix_(f, f)]
    Cd = np.zeros_like(K) if damping is None else np.asarray(damping, float)
    # external force on free dofs
    tip_pos = np.searchsorted(f, tipd)
    Fext = np.zeros((nt, len(f)))
    Fext[:, tip_pos] = F_Q
    Fext -= v @ model.Kuv[f].T

    nf = len(f)
    ufree = np.zeros(nf) if u0 is None else np.asarray(u0, float)
    vel = np.zeros(nf)
    acc = np.linalg.solve(M, Fext[0] - K @ ufree - Cd @ vel)

    a0, a1 = 1 / (beta * dt**2), 1 / (beta * dt)
    a2 = 1 / (2 * beta) - 1
    c0, c1, c2 = gamma / (beta * dt), gamma / beta - 1, dt * (gamma / (2 * beta) - 1)
    Keff_inv = np.linalg.inv(K + c0 * Cd + a0 * M)
    # z = (u, v, a); z_next = T z + S F_next
    I = np.eye(nf)
    G = Keff_inv @ np.hstack([a0 * M + c0 * Cd, a1 * M + c1 * Cd, a2 * M + c2 * Cd])
    Gu = G
    Ga = a0 * (Gu - np.hstack([I, 0 * I, 0 * I])) - np.hstack([0 * I, a1 * I, a2 * I])
    Gv = np.hstack([0 * I, I, dt * (1 - gamma) * I]) + dt * gamma * Ga
    T = np.vstack([Gu, Gv, Ga])
    S = np.vstack([Keff_inv, dt * gamma * a0 * Keff_inv, a0 * Keff_inv])
    SF = Fext @ S.T

    Z = np.empty((nt, 3 * nf))
    z = np.concatenate([ufree, vel, acc])
    Z[0] = z
    for k in range(1, nt):
        z = T @ z + SF[k]
        Z[k] = z
    U, V, Acc = Z[:, :nf], Z[:, nf:2 * nf], Z[:, 2 * nf:]

    acc_Q = Acc[:, tip_pos]
    # load applied on the component at P, then sign flip for the parent
    F_r = Acc @ model.M[np.ix_(r, f)].T + U @ model.K[np.ix_(r, f)].T + v @ model.Kuv[r].T
    g = U @ model.Kuv[f] + v @ model.Kvv.T
    y = np.hstack([acc_Q, -F_r, g])
    return TimeResponse(t, inputs, u_in, outputs, y, (U, V, Acc))


def newmark_energy(model: FeModel, response: TimeResponse, clamped_node: int = 0) -> np.ndarray:
    """Kinetic plus strain energy along a Newmark response."""
    f = free_dofs(model, model.node_dofs(clamped_node))
    U, V, _ = response.states
    M = model.M[np.ix_(f, f)]
    K = model.K[np.ix_(f, f)]
    return 0.5 * np.einsum("ti,ij,tj->t", V, M, V) + 0.5 * np.einsum("ti,ij,tj->t", U, K, U)


def relative_rms(a: np.ndarray, b: np.ndarray) -> float:
    """RMS of ``a - b`` over RMS of ``b``."""
    den = math.sqrt(np.mean(np.square(b)))
    return float(math.sqrt(np.mean(np.square(a - b))) / den) if den else float(np.sqrt(np.mean(np.square(a))))


def integrate_output(system: PortSystem, output: str, minus_input: Optional[str] = None,
                     label: str = "int") -> PortSystem:
    """
    Append an integrator of ``output`` (optionally minus one input channel)
    and expose its state as output ``label``.
    """
    i_y = system.output_index(output)[0]
    nx = system.n_states
    A = np.zeros((nx + 1, nx + 1))
    A[:nx, :nx] = system.A
    A[nx, :nx] = system.C[i_y]
    b = system.D[i_y].copy()
    if minus_input is not None:
        b[system.input_index(minus_input)[0]] -= 1.0
    B = np.vstack([system.B, b])
    C = np.zeros((len(system.outputs) + 1, nx + 1))
    C[:-1, :nx] = system.C
    C[-1, nx] = 1.0
    D = np.vstack([system.D, np.zeros(len(system.inputs))])
    return PortSystem(A, B, C, D, system.inputs, system.outputs + (label,),
                      system.states + (label,))
