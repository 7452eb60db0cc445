"""
Composition of double-port blocks into chains and closed loops.

A chain connects the Q side of a parent to the P side of a child: the
child's imposed acceleration is the parent's Q acceleration, and the load
the child applies on the parent is fed back as the parent's Q load. Direct
feedthrough on both sides creates an algebraic loop which is solved
exactly by inverting ``I - S D``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, IllPosedInterconnectionError
from .ports import PortSystem, append, port_group

LOOP_RCOND = 1e-12

BASES = ("clamped_with_excitation", "fixed")
TIPS = ("free", "loaded")


def feedback_connect(system: PortSystem, connections: Sequence[tuple],
                     keep_outputs: Optional[Sequence[str]] = None) -> PortSystem:
    """
    Close internal connections of a single system.

    Each ``(output, input)`` pair substitutes ``input := output``. Connected
    inputs disappear from the result. Outputs listed in ``keep_outputs`` are
    kept (all outputs by default).
    """
    if not connections:
        return system if keep_outputs is None else system.select(outputs=keep_outputs)
    out_idx = system.output_index([o for o, _ in connections])
    in_idx = system.input_index([i for _, i in connections])
    if len(set(in_idx)) != len(in_idx):
        raise ConfigurationError("an input is driven by more than one output")
    ext = np.array([j for j in range(len(system.inputs)) if j not in set(in_idx)], int)
    k = len(connections)

    # u_int = S y, y = C x + D_e u_ext + D_i u_int
    S = np.zeros((k, len(system.outputs)))
    S[np.arange(k), out_idx] = 1.0
    D_i = system.D[:, in_idx]
    D_e = system.D[:, ext]
    loop = np.eye(k) - S @ D_i
    if 1.0 / np.linalg.cond(loop) < LOOP_RCOND:
        raise IllPosedInterconnectionError(
            "algebraic loop matrix (I - S D) is singular; interconnection ill-posed"
        )
    W = np.linalg.solve(loop, np.hstack([S @ system.C, S @ D_e]))
    Wx, We = W[:, :system.n_states], W[:, system.n_states:]

    B_i = system.B[:, in_idx]
    A = system.A + B_i @ Wx
    B = system.B[:, ext] + B_i @ We
    C = system.C + D_i @ Wx
    D = D_e + D_i @ We
    closed = PortSystem(A, B, C, D, tuple(system.inputs[j] for j in ext),
                        system.outputs, system.states)
    if keep_outputs is not None:
        closed = closed.select(outputs=keep_outputs)
    return closed


def _single_group(labels, group, who):
    found = [x for x in labels if port_group(x) == group]
    owners = {x.rsplit(".", 2)[0] for x in found}
    if not found:
        raise ConfigurationError(f"{who} exposes no '{group}' ports")
    if len(owners) != 1:
        raise ConfigurationError(f"{who} exposes '{group}' ports of several components: {sorted(owners)}")
    return found


def connect(parent: PortSystem, child: PortSystem) -> PortSystem:
    """
    Chain ``child`` below ``parent`` (parent's Q to child's P).

    The result exposes the parent's P ports, the child's Q ports and every
    voltage and charge channel; the joint ports become internal.
    """
    acc_Q = _single_group(parent.outputs, "acc_Q", "parent")
    F_Q = _single_group(parent.inputs, "F_Q", "parent")
    acc_P = _single_group(child.inputs, "acc_P", "child")
    F_P = _single_group(child.outputs, "F_P", "child")
    if not (len(acc_Q) == len(F_Q) == len(acc_P) == len(F_P)):
        raise ConfigurationError(
            f"port dimensions differ: parent {len(acc_Q)} vs child {len(acc_P)}"
        )
    both = append(parent, child)
    pairs = list(zip(acc_Q, acc_P)) + list(zip(F_P, F_Q))
    internal = set(acc_Q) | set(F_P)
    keep = [y for y in both.outputs if y not in internal]
    return feedback_connect(both, pairs, keep_outputs=keep)


def chain(*systems: PortSystem) -> PortSystem:
    result = systems[0]
    for child in systems[1:]:
        result = connect(result, child)
    return result


def apply_boundary(system: PortSystem, base: str = "clamped_with_excitation",
                   tip: str = "free") -> PortSystem:
    """
    Impose end conditions on a chain.

    ``base='clamped_with_excitation'`` keeps the base acceleration as an
    exogenous input, ``'fixed'`` holds it at zero. ``tip='free'`` removes the
    tip load inputs, ``'loaded'`` keeps them.
    """
    if base not in BASES:
        raise ConfigurationError(f"base must be one of {BASES}, got {base!r}")
    if tip not in TIPS:
        raise ConfigurationError(f"tip must be one of {TIPS}, got {tip!r}")
    drop = []
    if base == "fixed":
        drop += _single_group(system.inputs, "acc_P", "system")
    if tip == "free":
        drop += _single_group(system.inputs, "F_Q", "system")
    return system.drop_inputs(drop) if drop else system


@dataclass(frozen=True)
class ClosedLoop:
    plant: PortSystem
    sensor: str
    actuator: str
    gain: float
    system: PortSystem

    @property
    def integrator_state(self) -> str:
        return self.system.states[-1]


def close_rate_feedback(plant: PortSystem, sensor: str, actuator: str,
                        gain: float, name: str = "ctrl") -> ClosedLoop:
    """
    Integrate the sensor acceleration into a rate and feed
    ``actuator = -gain * rate`` back.

    The closed loop has one extra state (the integrator), exposes the rate
    as output ``{name}.rate.0`` and the commanded voltage as
    ``{name}.v.0``; the actuator input is removed.
    """
    if gain < 0:
        raise ConfigurationError("feedback gain must be non-negative")
    group = port_group(sensor)
    if not group.startswith("acc"):
        raise ConfigurationError(f"sensor {sensor!r} is not an acceleration output")
    if port_group(actuator) != "v":
        raise ConfigurationError(f"actuator {actuator!r} is not a voltage input")
    i_s = plant.output_index(sensor)[0]
    i_a = plant.input_index(actuator)[0]
    rest = [j for j in range(len(plant.inputs)) if j != i_a]

    # the integrator has no feedthrough, so the loop is always algebraically well-posed
    nx = plant.n_states
    b_a = plant.B[:, i_a]
    d_a = plant.D[:, i_a]
    A = np.zeros((nx + 1, nx + 1))
    A[:nx, :nx] = plant.A
    A[:nx, nx] = -gain * b_a
    A[nx, :nx] = plant.C[i_s]
    A[nx, nx] = -gain * d_a[i_s]
    B = np.vstack([plant.B[:, rest], plant.D[i_s, rest]])
    C = np.zeros((len(plant.outputs) + 2, nx + 1))
    C[:-2, :nx] = plant.C
    C[:-2, nx] = -gain * d_a
    C[-2, nx] = 1.0
    C[-1, nx] = -gain
    D = np.zeros((len(plant.outputs) + 2, len(rest)))
    D[:-2] = plant.D[:, rest]
    system = PortSystem(A, B, C, D, tuple(plant.inputs[j] for j in rest),
                        plant.outputs + (f"{name}.rate.0", f"{name}.v.0"),
                        plant.states + (f"{name}.int",))
    return ClosedLoop(plant, sensor, actuator, float(gain), system)
