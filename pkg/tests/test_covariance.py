import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qlinctrl import is_hurwitz, matrix_exponential, min_eig_hermitian, propagate, solve_steady_state
from qlinctrl.covariance import (
    CovarianceTrajectory,
    LyapunovError,
    default_time_grid,
    propagate_piecewise,
)
from qlinctrl.example import ENTANGLED_P0, PRINTED_A
from qlinctrl.model import J, commutation_matrix
from qlinctrl.entanglement import THETA_PT


def random_hurwitz(rng, d, shift=0.1):
    A = rng.normal(size=(d, d))
    alpha = np.linalg.eigvals(A).real.max()
    return A - (alpha + shift) * np.eye(d)


def random_psd(rng, d):
    G = rng.normal(size=(d, d))
    return G @ G.T


class TestMatrixExponential:
    def test_zero(self):
        np.testing.assert_array_equal(matrix_exponential(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(
            matrix_exponential(np.diag([1.0, -1.0])), np.diag([np.e, 1 / np.e]), rtol=1e-15
        )

    @pytest.mark.parametrize("theta", [0.3, 1.0, np.pi / 2, 4.0, 25.0])
    def test_rotation(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        np.testing.assert_allclose(matrix_exponential(theta * J), [[c, s], [-s, c]], atol=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 16), st.floats(0.01, 20.0))
    def test_matches_scipy(self, seed, d, scale):
        M = np.random.default_rng(seed).normal(size=(d, d)) * scale / np.sqrt(d)
        ref = scipy.linalg.expm(M)
        err = np.linalg.norm(matrix_exponential(M) - ref) / np.linalg.norm(ref)
        assert err <= 1e-12 * max(1.0, np.linalg.norm(M, 1))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            matrix_exponential(np.zeros((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            matrix_exponential(np.array([[np.nan]]))

    def test_overflow(self):
        with pytest.raises(OverflowError):
            matrix_exponential(np.array([[1000.0]]))


class TestMinEigHermitian:
    def test_identity_plus_iJ(self):
        assert abs(min_eig_hermitian(np.eye(2), J)) <= 1e-12

    def test_pure_iJ(self):
        assert min_eig_hermitian(np.zeros((2, 2)), J) == pytest.approx(-1.0, abs=1e-12)

    def test_entangled_state_violates_partial_transpose(self):
        assert min_eig_hermitian(ENTANGLED_P0, THETA_PT) < 0

    def test_characteristic_polynomial_oracle(self):
        # eigenvalues of [[a, b + i y], [b - i y, c]] in closed form
        a, b, c, y = 1.3, 0.2, 0.7, 0.9
        X = np.array([[a, b], [b, c]])
        Y = np.array([[0.0, y], [-y, 0.0]])
        expected = (a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + b**2 + y**2)
        assert min_eig_hermitian(X, Y) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_matches_complex_eigensolver(self, seed, d):
        rng = np.random.default_rng(seed)
        X, Y = rng.normal(size=(2, d, d))
        X, Y = X + X.T, Y - Y.T
        ref = np.linalg.eigvalsh(X + 1j * Y)[0]
        assert min_eig_hermitian(X, Y) == pytest.approx(ref, abs=1e-11)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            min_eig_hermitian(np.eye(2), np.zeros((3, 3)))


class TestHurwitz:
    def test_example_loop(self):
        stable, alpha = is_hurwitz(PRINTED_A)
        assert stable
        assert alpha == pytest.approx(-0.005, abs=1e-12)

    def test_zero(self):
        assert is_hurwitz(np.zeros((3, 3))) == (False, 0.0)

    def test_negative_identity(self):
        assert is_hurwitz(-np.eye(3)) == (True, -1.0)


class TestSteadyState:
    def test_scalar_multiple(self):
        P = solve_steady_state(-0.005 * np.eye(4), 0.01 * np.eye(4))
        np.testing.assert_allclose(P, np.eye(4), atol=1e-10)

    def test_scalar(self):
        assert solve_steady_state([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_not_hurwitz(self):
        with pytest.raises(LyapunovError, match="Hurwitz"):
            solve_steady_state(np.eye(2), np.eye(2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 10))
    def test_matches_scipy(self, seed, d):
        rng = np.random.default_rng(seed)
        A, Q = random_hurwitz(rng, d), random_psd(rng, d)
        P = solve_steady_state(A, Q)
        ref = scipy.linalg.solve_continuous_lyapunov(A, -Q)
        np.testing.assert_allclose(P, ref, atol=1e-8 * (1 + np.abs(ref).max()))
        np.testing.assert_array_equal(P, P.T)
        assert np.linalg.eigvalsh(P)[0] >= -1e-9 * np.abs(P).max()


class TestPropagate:
    def test_constant_when_static(self):
        P0 = np.array([[2.0, 0.3], [0.3, 1.0]])
        traj = propagate(np.zeros((2, 2)), np.zeros((2, 2)), P0, np.linspace(0, 5, 11))
        for P in traj.P:
            np.testing.assert_array_equal(P, P0)

    def test_scalar_closed_form(self):
        t = np.linspace(0, 5, 501)
        traj = propagate([[-1.0]], [[2.0]], [[0.0]], t)
        np.testing.assert_allclose(traj.P[:, 0, 0], 1 - np.exp(-2 * t), atol=1e-9, rtol=0)

    def test_non_uniform_grid(self):
        t = np.concatenate([[0.0], np.sort(np.random.default_rng(3).uniform(0, 4, 30))])
        traj = propagate([[-1.0]], [[2.0]], [[0.0]], t)
        np.testing.assert_allclose(traj.P[:, 0, 0], 1 - np.exp(-2 * t), atol=1e-9, rtol=0)

    def test_step_size_invariance(self):
        rng = np.random.default_rng(11)
        A, Q, P0 = random_hurwitz(rng, 5), random_psd(rng, 5), random_psd(rng, 5)
        fine = propagate(A, Q, P0, np.linspace(0, 10, 401))
        coarse = propagate(A, Q, P0, np.linspace(0, 10, 201))
        np.testing.assert_allclose(fine.P[::2], coarse.P, atol=1e-9, rtol=0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_converges_to_steady_state(self, seed, d):
        rng = np.random.default_rng(seed)
        A, Q, P0 = random_hurwitz(rng, d), random_psd(rng, d), random_psd(rng, d)
        T = 20 / abs(is_hurwitz(A).abscissa)
        traj = propagate(A, Q, P0, np.linspace(0, T, 201))
        assert np.linalg.norm(traj.P[-1] - solve_steady_state(A, Q)) <= 1e-6

    def test_outputs_are_symmetric(self):
        rng = np.random.default_rng(5)
        A, Q, P0 = random_hurwitz(rng, 6), random_psd(rng, 6), random_psd(rng, 6)
        for P in propagate(A, Q, P0, np.linspace(0, 3, 50)).P:
            np.testing.assert_array_equal(P, P.T)

    @pytest.mark.parametrize(
        "times, match",
        [([0.5, 1.0], "start at 0"), ([0.0, 1.0, 1.0], "increasing")],
    )
    def test_bad_grid(self, times, match):
        with pytest.raises(LyapunovError, match=match):
            propagate([[-1.0]], [[1.0]], [[0.0]], times)

    def test_asymmetric_initial(self):
        with pytest.raises(LyapunovError, match="symmetric"):
            propagate(-np.eye(2), np.eye(2), [[1.0, 0.5], [0.0, 1.0]], [0.0, 1.0])

    def test_non_finite(self):
        with pytest.raises(LyapunovError, match="non-finite"):
            propagate([[np.inf]], [[1.0]], [[0.0]], [0.0, 1.0])

    def test_single_sample_grid(self):
        traj = propagate([[-1.0]], [[2.0]], [[0.25]], [0.0])
        assert len(traj) == 1
        assert traj.P[0, 0, 0] == 0.25


class TestPiecewise:
    def test_single_segment_matches_propagate(self):
        rng = np.random.default_rng(2)
        A, Q, P0 = random_hurwitz(rng, 3), random_psd(rng, 3), random_psd(rng, 3)
        t = np.linspace(0, 4, 41)
        np.testing.assert_allclose(
            propagate_piecewise([(0.0, A, Q)], P0, t).P, propagate(A, Q, P0, t).P, atol=1e-12
        )

    def test_switch_matches_restart(self):
        t = np.linspace(0, 2, 21)
        traj = propagate_piecewise([(0.0, [[-1.0]], [[2.0]]), (1.0, [[-3.0]], [[0.0]])], [[0.0]], t)
        p1 = 1 - np.exp(-2.0)
        expected = np.where(t <= 1, 1 - np.exp(-2 * t), p1 * np.exp(-6 * (t - 1)))
        np.testing.assert_allclose(traj.P[:, 0, 0], expected, atol=1e-12)

    def test_first_segment_must_start_at_zero(self):
        with pytest.raises(LyapunovError):
            propagate_piecewise([(1.0, [[-1.0]], [[1.0]])], [[0.0]], [0.0, 1.0])


class TestTimeGrid:
    def test_default_horizon(self):
        t = default_time_grid(PRINTED_A, steps=2000)
        assert len(t) == 2001
        assert t[-1] == pytest.approx(10 / 0.005)

    def test_zero_horizon(self):
        np.testing.assert_array_equal(default_time_grid(PRINTED_A, steps=10, t_end=0.0), [0.0])

    def test_unstable_needs_t_end(self):
        with pytest.raises(LyapunovError):
            default_time_grid(np.eye(2))


class TestTrajectory:
    def test_validates_lengths(self):
        with pytest.raises(ValueError):
            CovarianceTrajectory(np.array([0.0, 1.0]), np.zeros((1, 2, 2)), ())

    def test_min_eigs_vacuum(self):
        P = np.broadcast_to(np.eye(4), (3, 4, 4))
        traj = CovarianceTrajectory(np.array([0.0, 1.0, 2.0]), P, (2, 2, 0))
        np.testing.assert_allclose(traj.min_eigs(commutation_matrix(2)), 0.0, atol=1e-12)
