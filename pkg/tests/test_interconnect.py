"""Chain composition, boundary conditions and the rate-feedback loop."""

import numpy as np
import pytest

from piezotitop.analysis import modal_frequencies
from piezotitop.errors import ConfigurationError, IllPosedInterconnectionError
from piezotitop.fe_piezo_beam import VoltageTopology, free_dofs
from piezotitop.interconnect import (
    apply_boundary,
    chain,
    close_rate_feedback,
    connect,
    feedback_connect,
)
from piezotitop.ports import PortSystem, append
from piezotitop.titop import DampingSpec, component

from conftest import quiet_assemble, preset_beam, preset_piezo


def beams(n, zeta=0.0, m_retain=None):
    model = quiet_assemble(preset_beam(), preset_piezo())
    damping = DampingSpec(zeta)
    return [component(model, f"b{k + 1}", damping, m_retain).system for k in range(n)]


def static_block(name, D):
    return PortSystem(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), np.asarray(D, float),
                      (f"{name}.F_Q.x", f"{name}.acc_P.x"), (f"{name}.acc_Q.x", f"{name}.F_P.x"))


def pole_frequencies(system):
    p = system.poles()
    return np.sort(np.abs(p[p.imag > 0])) / (2 * np.pi)


class TestChain:

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_poles_equal_monolithic_cantilever(self, n):
        system = apply_boundary(chain(*beams(n)))
        mono = quiet_assemble(preset_beam(3 * n, 0.5 * n), preset_piezo())
        np.testing.assert_allclose(pole_frequencies(system),
                                   modal_frequencies(mono, "clamped-free"), rtol=1e-6)

    def test_ports_after_connection(self):
        system = chain(*beams(2))
        assert system.match_inputs("*.F_Q.*") == ["b2.F_Q.u", "b2.F_Q.w", "b2.F_Q.theta"]
        assert system.match_inputs("*.acc_P.*") == ["b1.acc_P.u", "b1.acc_P.w", "b1.acc_P.theta"]
        assert system.match_outputs("*.g.*") == ["b1.g.0", "b2.g.0"]
        assert system.match_outputs("b1.acc_Q.*") == []
        assert system.shape == (8, 8)

    def test_voltage_transfer_matches_monolithic_fe(self):
        system = apply_boundary(chain(*beams(2)))
        mono = quiet_assemble(preset_beam(6, 1.0), preset_piezo(),
                              VoltageTopology.per_element(range(1, 7)))
        f = free_dofs(mono, range(3))
        tip = list(f).index(mono.dof(6, "w"))
        for omega in (50.0, 1000.0, 5000.0):
            Z = mono.K[np.ix_(f, f)] - omega**2 * mono.M[np.ix_(f, f)]
            u = np.linalg.solve(Z, -mono.Kuv[f][:, :3].sum(axis=1))
            G = system.transfer_at(omega)
            got = G[system.output_index("b2.acc_Q.w")[0], system.input_index("b1.v.0")[0]]
            assert got.real == pytest.approx(-omega**2 * u[tip], rel=1e-8)

    def test_associativity(self):
        a, b, c = beams(3, zeta=0.01, m_retain=4)
        left = connect(connect(a, b), c)
        right = connect(a, connect(b, c))
        right = right.select(inputs=list(left.inputs), outputs=list(left.outputs))
        for omega in (10.0, 700.0, 6000.0):
            G = left.transfer_at(omega)
            np.testing.assert_allclose(right.transfer_at(omega), G, rtol=1e-9,
                                       atol=1e-10 * np.abs(G).max())

    def test_ill_posed_loop(self):
        parent = static_block("p", [[1.0, 0.0], [0.0, 0.0]])
        child = static_block("c", [[0.0, 0.0], [0.0, 1.0]])
        with pytest.raises(IllPosedInterconnectionError):
            connect(parent, child)

    def test_well_posed_static_loop(self):
        parent = static_block("p", [[0.5, 1.0], [0.0, 0.0]])
        child = static_block("c", [[0.0, 1.0], [0.0, 1.0]])
        joined = connect(parent, child)
        # acc_Q_p = 0.5 F_Q_p + acc_P_p and F_Q_p = F_P_c = acc_Q_p, so acc_Q_p = 2 acc_P_p
        assert joined.inputs == ("p.acc_P.x", "c.F_Q.x")
        assert joined.outputs == ("p.F_P.x", "c.acc_Q.x")
        assert joined.D[1, 0] == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        parent = static_block("p", np.zeros((2, 2)))
        wide = PortSystem([], np.zeros((0, 4)), np.zeros((4, 0)), np.zeros((4, 4)),
                          ("c.F_Q.x", "c.F_Q.y", "c.acc_P.x", "c.acc_P.y"),
                          ("c.acc_Q.x", "c.acc_Q.y", "c.F_P.x", "c.F_P.y"))
        with pytest.raises(ConfigurationError, match="dimensions"):
            connect(parent, wide)

    def test_duplicate_driver_rejected(self):
        block = static_block("p", np.zeros((2, 2)))
        with pytest.raises(ConfigurationError):
            feedback_connect(block, [("p.acc_Q.x", "p.F_Q.x"), ("p.F_P.x", "p.F_Q.x")])


class TestBoundary:

    def test_fixed_base_free_tip(self):
        system = apply_boundary(chain(*beams(2)), base="fixed", tip="free")
        assert system.inputs == ("b1.v.0", "b2.v.0")

    def test_loaded_tip_keeps_loads(self):
        system = apply_boundary(chain(*beams(1)), tip="loaded")
        assert len(system.match_inputs("*.F_Q.*")) == 3

    def test_unknown_condition(self):
        with pytest.raises(ConfigurationError):
            apply_boundary(chain(*beams(1)), base="pinned")


class TestRateFeedback:

    @pytest.fixture
    def plant(self):
        return apply_boundary(chain(*beams(2, zeta=0.001)))

    def test_zero_gain_adds_integrator(self, plant):
        loop = close_rate_feedback(plant, "b2.acc_Q.w", "b1.v.0", 0.0)
        p = loop.system.poles()
        expected = np.concatenate([plant.poles(), [0.0]])
        np.testing.assert_allclose(np.sort_complex(p), np.sort_complex(expected), atol=1e-9)
        assert loop.system.outputs[-2:] == ("ctrl.rate.0", "ctrl.v.0")
        assert "b1.v.0" not in loop.system.inputs

    def test_small_gain_damps_mode_one(self, plant):
        from piezotitop.analysis import damping_ratio, mode1_loop_gain

        k_ref = mode1_loop_gain(plant, "b2.acc_Q.w", "b1.v.0")
        p0 = plant.poles()
        mode1 = p0[(p0.imag > 0)][np.argmin(np.abs(p0[p0.imag > 0]))]
        p = close_rate_feedback(plant, "b2.acc_Q.w", "b1.v.0", 1e-3 * k_ref).system.poles()
        moved = p[np.argmin(np.abs(p - mode1))]
        assert moved.real < mode1.real
        assert damping_ratio(moved) > damping_ratio(mode1)

    def test_port_kind_checks(self, plant):
        with pytest.raises(ConfigurationError):
            close_rate_feedback(plant, "b2.g.0", "b1.v.0", 1.0)
        with pytest.raises(ConfigurationError):
            close_rate_feedback(plant, "b2.acc_Q.w", "b1.acc_P.w", 1.0)
        with pytest.raises(ConfigurationError):
            close_rate_feedback(plant, "b2.acc_Q.w", "b1.v.0", -1.0)
        with pytest.raises(ConfigurationError):
            close_rate_feedback(plant, "b3.acc_Q.w", "b1.v.0", 1.0)

    def test_voltage_output_is_minus_gain_times_rate(self, plant):
        loop = close_rate_feedback(plant, "b2.acc_Q.w", "b1.v.0", 250.0).system
        i_rate, i_v = loop.output_index(["ctrl.rate.0", "ctrl.v.0"])
        np.testing.assert_allclose(loop.C[i_v], -250.0 * loop.C[i_rate])


class TestAppend:

    def test_block_diagonal(self):
        a, b = beams(2, m_retain=2)
        both = append(a, b)
        assert both.n_states == a.n_states + b.n_states
        np.testing.assert_array_equal(both.A[:a.n_states, a.n_states:], 0)
