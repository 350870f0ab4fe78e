import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlinctrl import (
    ConstructionError,
    ItoFieldSpec,
    OscillatorSpec,
    QuadratureSystem,
    heisenberg_check,
    realizability_residual,
    to_quadrature,
    vacuum_field,
)
from qlinctrl.example import cavity_spec
from qlinctrl.model import J, commutation_matrix

I2 = np.eye(2)


def closed_oscillator(R):
    return OscillatorSpec(R, np.zeros((1, 2)), np.eye(1))


class TestToQuadrature:
    def test_cavity(self):
        sys = to_quadrature(cavity_spec(), vacuum_field(1))
        np.testing.assert_allclose(sys.A, -0.005 * I2, atol=1e-15)
        np.testing.assert_allclose(sys.B, -0.1 * I2, atol=1e-15)
        np.testing.assert_allclose(sys.C, 0.1 * I2, atol=1e-15)
        np.testing.assert_array_equal(sys.D, I2)

    def test_uncoupled_oscillator(self):
        sys = to_quadrature(closed_oscillator(np.zeros((2, 2))), vacuum_field(1))
        for M in (sys.A, sys.B, sys.C):
            np.testing.assert_array_equal(M, 0)
        np.testing.assert_array_equal(sys.D, I2)

    def test_hamiltonian_only(self):
        sys = to_quadrature(closed_oscillator(I2), vacuum_field(1))
        np.testing.assert_array_equal(sys.A, 2 * J)
        np.testing.assert_array_equal(sys.B, 0)

    def test_two_field_output_ordering(self):
        # rows of C interleave 2 Re K_j and 2 Im K_j
        K = np.array([[0.3 + 0.1j, -0.2j], [0.5, 0.4 + 0.4j]])
        sys = to_quadrature(OscillatorSpec(np.zeros((2, 2)), K, np.eye(2)), vacuum_field(2))
        expected = np.vstack([2 * K[0].real, 2 * K[0].imag, 2 * K[1].real, 2 * K[1].imag])
        np.testing.assert_allclose(sys.C, expected, atol=1e-15)

    def test_scattering_blocks(self):
        phi = 0.7
        S = np.array([[np.exp(1j * phi)]])
        sys = to_quadrature(OscillatorSpec(np.zeros((2, 2)), np.zeros((1, 2)), S), vacuum_field(1))
        c, s = np.cos(phi), np.sin(phi)
        np.testing.assert_allclose(sys.D, [[c, -s], [s, c]], atol=1e-15)

    def test_field_size_mismatch(self):
        with pytest.raises(ConstructionError):
            to_quadrature(cavity_spec(), vacuum_field(2))


class TestOscillatorSpec:
    def test_nonsymmetric_R(self):
        with pytest.raises(ConstructionError, match="symmetric"):
            OscillatorSpec([[0.0, 1.0], [0.0, 0.0]], np.zeros((1, 2)), np.eye(1))

    def test_nonunitary_S(self):
        with pytest.raises(ConstructionError, match="unitary"):
            OscillatorSpec(np.zeros((2, 2)), np.zeros((1, 2)), 2 * np.eye(1))

    def test_K_width(self):
        with pytest.raises(ConstructionError):
            OscillatorSpec(np.zeros((2, 2)), np.zeros((1, 4)), np.eye(1))

    def test_arrays_are_read_only(self):
        spec = cavity_spec()
        with pytest.raises(ValueError):
            spec.K[0, 0] = 1.0


class TestRealizability:
    def test_cavity_is_exact(self):
        sys = to_quadrature(cavity_spec(), vacuum_field(1))
        assert realizability_residual(sys) <= 1e-12

    def test_trivial_zero(self):
        sys = QuadratureSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), I2, vacuum_field(1))
        assert realizability_residual(sys) == 0.0

    def test_hand_oracle(self):
        # A Theta + Theta A^T = 2J and -i B T_w B^T = J
        sys = QuadratureSystem(I2, I2, np.zeros((2, 2)), I2, vacuum_field(1))
        assert realizability_residual(sys) == pytest.approx(3 * np.sqrt(2), abs=1e-14)


class TestVacuumField:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_structure(self, m):
        f = vacuum_field(m)
        np.testing.assert_array_equal(f.S_w, np.eye(2 * m))
        np.testing.assert_array_equal(f.T_w, 1j * commutation_matrix(m))

    def test_F_w_spectrum(self):
        eig = np.linalg.eigvalsh(vacuum_field(2).F_w)
        np.testing.assert_allclose(eig, [0, 0, 2, 2], atol=1e-14)

    def test_zero_fields_rejected(self):
        with pytest.raises(ConstructionError):
            vacuum_field(0)

    def test_wrong_T_w_rejected(self):
        with pytest.raises(ConstructionError):
            ItoFieldSpec(np.eye(2), -1j * J)

    def test_unphysical_S_w_rejected(self):
        with pytest.raises(ConstructionError):
            ItoFieldSpec(0.5 * np.eye(2), 1j * J)


class TestHeisenberg:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_vacuum_is_minimum_uncertainty(self, n):
        rep = heisenberg_check(np.eye(2 * n), commutation_matrix(n))
        assert rep.ok
        assert abs(rep.min_eig) <= 1e-12

    def test_half_vacuum_fails(self):
        rep = heisenberg_check(0.5 * np.eye(4), commutation_matrix(2))
        assert not rep.ok
        assert rep.min_eig == pytest.approx(-0.5, abs=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            heisenberg_check(np.eye(4), J)


def unitary(rng, m):
    Z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_random_specs_are_realizable(seed, n, m):
    rng = np.random.default_rng(seed)
    H = rng.uniform(-1, 1, size=(2 * n, 2 * n))
    K = rng.normal(size=(m, 2 * n)) + 1j * rng.normal(size=(m, 2 * n))
    spec = OscillatorSpec((H + H.T) / 2, K, unitary(rng, m))
    sys = to_quadrature(spec, vacuum_field(m))
    assert realizability_residual(sys) <= 1e-10
    # D is orthogonal and commutes with diag_m(J)
    Th = commutation_matrix(m)
    assert np.linalg.norm(sys.D.T @ sys.D - np.eye(2 * m)) <= 1e-10
    assert np.linalg.norm(sys.D @ Th - Th @ sys.D) <= 1e-10
