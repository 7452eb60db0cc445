"""Component modes synthesis: basis structure, zero pattern and spectra."""

import dataclasses

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from piezotitop.analysis import modal_frequencies
from piezotitop.cms import (
    component_basis,
    constraint_modes,
    partition,
    reduce,
    rigid_transport,
    transform,
)
from piezotitop.errors import ConfigurationError, ModelError, NumericalError
from piezotitop.fe_piezo_beam import BeamSection, assemble_spatial

from conftest import quiet_assemble, preset_beam, preset_piezo


def reduced_frequencies(cms):
    q = cms.m + cms.nc
    lam = la.eigh(cms.K[:q, :q], cms.M[:q, :q], eigvals_only=True)
    return np.sqrt(lam) / (2 * np.pi)


class TestPartition:

    def test_default_ends(self, model):
        part = partition(model)
        np.testing.assert_array_equal(part.r, [0, 1, 2])
        np.testing.assert_array_equal(part.c, [9, 10, 11])
        np.testing.assert_array_equal(part.n, np.arange(3, 9))

    def test_same_node_rejected(self, model):
        with pytest.raises(ConfigurationError):
            partition(model, 1, 1)

    def test_interior_connection_point(self, model):
        part = partition(model, 0, 2)
        assert set(part.n) == set(range(3, 6)) | set(range(9, 12))


class TestRigidTransport:

    def test_planar_offset(self):
        np.testing.assert_allclose(rigid_transport([0.5, 0, 0]),
                                   [[1, 0, 0], [0, 1, 0.5], [0, 0, 1]])

    def test_spatial_is_cross_product(self, rng):
        r = rng.normal(size=3)
        T = rigid_transport(r, 6)
        v, w = rng.normal(size=3), rng.normal(size=3)
        moved = T @ np.concatenate([v, w])
        np.testing.assert_allclose(moved[:3], v + np.cross(w, r), atol=1e-14)
        np.testing.assert_allclose(moved[3:], w)

    def test_unsupported_dofs(self):
        with pytest.raises(ConfigurationError):
            rigid_transport([1, 0, 0], 4)


class TestBasis:

    def test_block_structure(self, model):
        basis = component_basis(model, partition(model))
        Phi = basis.matrix
        m, nc = basis.m, 3
        np.testing.assert_array_equal(Phi[6:9, :m], 0)
        np.testing.assert_array_equal(Phi[6:9, m:m + nc], np.eye(3))
        np.testing.assert_array_equal(Phi[9:, 9:], np.eye(3))
        np.testing.assert_allclose(basis.phi_cr, rigid_transport([0.5, 0, 0]))
        assert basis.condition < 1e6

    def test_mass_normalised_modes(self, model):
        cms = reduce(model)
        n, _, _ = cms.slices()
        np.testing.assert_allclose(cms.M[n, n], np.eye(cms.m), atol=1e-12)
        np.testing.assert_allclose(cms.K[n, n], np.diag(cms.omega**2), rtol=1e-10,
                                   atol=1e-10 * cms.omega.max() ** 2)

    def test_modes_sorted_and_signed(self, model):
        basis = component_basis(model, partition(model))
        assert np.all(np.diff(basis.omega) > 0)
        pivots = basis.phi_nn[np.argmax(np.abs(basis.phi_nn), axis=0), np.arange(basis.m)]
        assert np.all(pivots > 0)

    def test_rigid_mass_block(self, beam, piezo):
        model = quiet_assemble(beam, piezo)
        cms = reduce(model)
        mass = beam.mass + piezo.density * piezo.area * beam.length
        L = beam.length
        expected = np.array([[mass, 0, 0], [0, mass, mass * L / 2], [0, mass * L / 2, mass * L**2 / 3]])
        np.testing.assert_allclose(cms.block("M", "r", "r"), expected, rtol=1e-12, atol=1e-12)

    def test_retention_bounds(self, model):
        with pytest.raises(ConfigurationError):
            reduce(model, m_retain=0)
        with pytest.raises(ConfigurationError):
            reduce(model, m_retain=7)

    def test_singular_interior_stiffness(self):
        with pytest.raises(ModelError):
            constraint_modes(np.zeros((2, 2)), np.ones((2, 1)))


class TestZeroPattern:

    @settings(max_examples=25, deadline=None)
    @given(n_elements=st.integers(2, 10), length=st.floats(0.2, 2.0),
           thickness=st.floats(2e-3, 2e-2), m_frac=st.floats(0.1, 1.0))
    def test_stiffness_block_diagonal(self, n_elements, length, thickness, m_frac):
        beam = BeamSection(length, n_elements, thickness, 0.03, 2600.0, 60e9)
        model = quiet_assemble(beam, preset_piezo())
        nn = 3 * (n_elements - 1)
        cms = reduce(model, m_retain=max(1, int(round(m_frac * nn))))
        tol = 1e-8 * np.abs(model.K).max()
        for rows, cols in (("n", "c"), ("n", "r"), ("c", "r"), ("r", "r")):
            assert np.abs(cms.block("K", rows, cols)).max() <= tol

    def test_spatial(self, beam, piezo):
        model = assemble_spatial(beam, piezo)
        cms = reduce(model)
        tol = 1e-8 * np.abs(model.K).max()
        for rows, cols in (("n", "c"), ("n", "r"), ("c", "r"), ("r", "r")):
            assert np.abs(cms.block("K", rows, cols)).max() <= tol

    def test_invalid_basis_detected(self, model):
        basis = component_basis(model, partition(model))
        bad = dataclasses.replace(basis, phi_nc=basis.phi_nc * 1.01)
        with pytest.raises(NumericalError, match="invalid basis"):
            transform(model, bad)
        transform(model, bad, check=False)

    def test_uniform_strip_rigid_coupling_vanishes(self, model):
        cms = reduce(model)
        assert np.abs(cms.coupling("r")).max() < 1e-12 * np.abs(model.Kuv).max()


class TestSpectra:

    def test_full_retention_preserves_clamped_free_spectrum(self, model):
        f_fe = modal_frequencies(model, "clamped-free")
        f_cms = reduced_frequencies(reduce(model))
        np.testing.assert_allclose(f_cms, f_fe, rtol=1e-9)

    def test_truncation_monotone(self):
        model = quiet_assemble(preset_beam(12), preset_piezo())
        exact = modal_frequencies(model, "clamped-free")[:3]
        previous = None
        for m in (1, 2, 4, 8, 16, 33):
            f = reduced_frequencies(reduce(model, m_retain=m))[:3]
            assert np.all(f >= exact * (1 - 1e-8))
            if previous is not None:
                assert np.all(f <= previous * (1 + 1e-8))
            previous = f
        np.testing.assert_allclose(previous, exact, rtol=1e-9)

    def test_coupling_is_transformed(self, model):
        part = partition(model)
        basis = component_basis(model, part)
        cms = transform(model, basis)
        np.testing.assert_allclose(cms.Kv, basis.matrix.T @ model.Kuv[part.order], rtol=1e-14)
        np.testing.assert_array_equal(cms.Kvv, model.Kvv)
