"""Quadrature-form linear quantum stochastic systems.

Canonical operators are ordered ``x = (q1, p1, ..., qn, pn)`` with
``[q_j, p_j] = 2i``, so the commutation matrix is ``diag_n(J)`` and the
vacuum covariance is the identity. Field quadratures follow the same
scaling: ``w = 2 (Re A_1, Im A_1, ..., Re A_m, Im A_m)``.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .covariance import min_eig_hermitian

__all__ = [
    "J",
    "ConstructionError",
    "OscillatorSpec",
    "ItoFieldSpec",
    "QuadratureSystem",
    "HeisenbergReport",
    "commutation_matrix",
    "vacuum_field",
    "to_quadrature",
    "realizability_residual",
    "heisenberg_check",
]

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
J.setflags(write=False)

STRUCTURE_TOL = 1e-12
REALIZABILITY_TOL = 1e-10
LMI_TOL = 1e-9


class ConstructionError(ValueError):
    """A model object was built from data that violates one of its invariants."""


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _as_2d(a, dtype, name):
    arr = np.atleast_2d(np.asarray(a, dtype=dtype))
    if arr.ndim != 2:
        raise ConstructionError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


@lru_cache(maxsize=32)
def commutation_matrix(n):
    """Return ``diag_n(J)`` (read-only); an empty 0x0 matrix for ``n == 0``."""
    out = np.kron(np.eye(n), J)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class OscillatorSpec:
    """Physical parameters of ``n`` coupled open oscillators.

    ``R`` is the Hamiltonian matrix (``H = x^T R x / 2``), ``K`` the coupling
    matrix (``L = K x``) and ``S`` the unitary scattering matrix.
    """

    R: np.ndarray
    K: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        R = _as_2d(self.R, float, "R")
        K = _as_2d(self.K, complex, "K")
        S = _as_2d(self.S, complex, "S")
        if R.shape[0] != R.shape[1] or R.shape[0] % 2:
            raise ConstructionError(f"R must be 2n x 2n, got {R.shape}")
        if not np.array_equal(R, R.T):
            raise ConstructionError("R must be symmetric")
        if K.shape[1] != R.shape[0]:
            raise ConstructionError(f"K must have {R.shape[0]} columns, got {K.shape}")
        m = K.shape[0]
        if S.shape != (m, m):
            raise ConstructionError(f"S must be {m} x {m} to match K, got {S.shape}")
        if np.linalg.norm(S.conj().T @ S - np.eye(m)) > STRUCTURE_TOL:
            raise ConstructionError("S must be unitary")
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "K", _frozen(K, complex))
        object.__setattr__(self, "S", _frozen(S, complex))

    @property
    def n(self):
        return self.R.shape[0] // 2

    @property
    def m(self):
        return self.K.shape[0]


@dataclass(frozen=True, eq=False)
class ItoFieldSpec:
    """Ito matrices of ``m`` boson fields: ``dw dw^T = (S_w + T_w) dt``."""

    S_w: np.ndarray
    T_w: np.ndarray

    def __post_init__(self):
        S_w = _as_2d(self.S_w, float, "S_w")
        T_w = _as_2d(self.T_w, complex, "T_w")
        if S_w.shape[0] != S_w.shape[1] or S_w.shape[0] % 2 or S_w.shape[0] == 0:
            raise ConstructionError(f"S_w must be 2m x 2m with m >= 1, got {S_w.shape}")
        if not np.array_equal(S_w, S_w.T):
            raise ConstructionError("S_w must be symmetric")
        m = S_w.shape[0] // 2
        if T_w.shape != S_w.shape or not np.array_equal(T_w, 1j * commutation_matrix(m)):
            raise ConstructionError("T_w must equal i * diag_m(J)")
        F_w = S_w + T_w
        if np.linalg.eigvalsh(F_w).min() < -REALIZABILITY_TOL:
            raise ConstructionError("F_w = S_w + T_w must be positive semidefinite")
        object.__setattr__(self, "S_w", _frozen(S_w))
        object.__setattr__(self, "T_w", _frozen(T_w, complex))

    @property
    def m(self):
        return self.S_w.shape[0] // 2

    @property
    def F_w(self):
        return self.S_w + self.T_w


def vacuum_field(m):
    """Ito matrices of ``m`` independent vacuum fields."""
    if m < 1:
        raise ConstructionError("a field needs m >= 1 channels")
    return ItoFieldSpec(np.eye(2 * m), 1j * commutation_matrix(m))


@dataclass(frozen=True, eq=False)
class QuadratureSystem:
    """Real quadruple ``dx = A x dt + B dw``, ``dy = C x dt + D dw``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    field: ItoFieldSpec

    def __post_init__(self):
        A = _as_2d(self.A, float, "A")
        dim = A.shape[0]
        if A.shape != (dim, dim) or dim % 2:
            raise ConstructionError(f"A must be 2n x 2n, got {A.shape}")
        w = 2 * self.field.m
        shapes = {"B": (dim, w), "C": (w, dim), "D": (w, w)}
        arrs = {}
        for name, shape in shapes.items():
            arr = _as_2d(getattr(self, name), float, name)
            if arr.shape != shape:
                raise ConstructionError(f"{name} must be {shape[0]} x {shape[1]}, got {arr.shape}")
            arrs[name] = arr
        D = arrs["D"]
        if np.linalg.norm(D.T @ D - np.eye(w)) > REALIZABILITY_TOL:
            raise ConstructionError("D must be orthogonal")
        object.__setattr__(self, "A", _frozen(A))
        for name, arr in arrs.items():
            object.__setattr__(self, name, _frozen(arr))

    @property
    def n(self):
        return self.A.shape[0] // 2

    @property
    def m(self):
        return self.field.m

    @property
    def theta(self):
        return commutation_matrix(self.n)


def _real_or_raise(M, name):
    if np.abs(M.imag).max(initial=0.0) > STRUCTURE_TOL:
        raise ConstructionError(f"{name} has a non-negligible imaginary part")
    return M.real


def quadrature_matrices(R, K, S):
    """Raw ``(A, B, C, D)`` for ``(R, K, S)``; ``A`` and ``B`` may carry rounding-level imaginary parts."""
    n, m = R.shape[0] // 2, K.shape[0]
    theta = commutation_matrix(n)

    A = 2 * theta @ (R + (K.conj().T @ K).imag)

    B_o = 2j * theta @ np.hstack([-K.conj().T @ S, K.T @ S.conj()])
    B = np.empty((2 * n, 2 * m), dtype=complex)
    B[:, 0::2] = (B_o[:, :m] + B_o[:, m:]) / 2
    B[:, 1::2] = 1j * (B_o[:, :m] - B_o[:, m:]) / 2

    C = np.empty((2 * m, 2 * n))
    C[0::2] = 2 * K.real
    C[1::2] = 2 * K.imag

    D = np.empty((2 * m, 2 * m))
    D[0::2, 0::2] = S.real
    D[0::2, 1::2] = -S.imag
    D[1::2, 0::2] = S.imag
    D[1::2, 1::2] = S.real
    return A, B, C, D


def to_quadrature(spec, field):
    """Map physical parameters ``(R, K, S)`` to the real quadrature form.

    The field increments are converted with ``dA_j = (dw_{2j} + i dw_{2j+1}) / 2``
    so ``B`` is real and the Ito relation of ``w`` is the one in ``field``.

    >>> K = 0.05 * np.array([[1, 1j]])
    >>> sys = to_quadrature(OscillatorSpec(np.zeros((2, 2)), K, [[1]]), vacuum_field(1))
    >>> bool(np.allclose(sys.A, -0.005 * np.eye(2)) and np.allclose(sys.B, -0.1 * np.eye(2)))
    True
    """
    if field.m != spec.m:
        raise ConstructionError(f"field has m={field.m} channels, spec couples to m={spec.m}")
    A, B, C, D = quadrature_matrices(spec.R, spec.K, spec.S)
    sys = QuadratureSystem(
        _real_or_raise(A, "A"), _real_or_raise(B, "B"), C, D, field
    )
    res = realizability_residual(sys)
    if res > REALIZABILITY_TOL:
        raise ConstructionError(f"converted system is not physically realizable (residual {res:.3e})")
    return sys


def realizability_residual(sys, theta=None):
    """Frobenius norm of ``A Theta + Theta A^T - i B T_w B^T``.

    Zero exactly when the dynamics preserve the canonical commutation
    relations. ``theta`` defaults to ``diag_n(J)``.
    """
    A, B = sys.A, sys.B
    theta = sys.theta if theta is None else np.asarray(theta)
    if theta.shape != A.shape or B.shape[1] != sys.field.T_w.shape[0]:
        raise ConstructionError("dimension mismatch in realizability check")
    M = A @ theta + theta @ A.T - 1j * B @ sys.field.T_w @ B.T
    return float(np.linalg.norm(M))


class HeisenbergReport(NamedTuple):
    min_eig: float
    ok: bool


def heisenberg_check(P, theta, tol=LMI_TOL):
    """Test the uncertainty relation ``P + i Theta >= 0``."""
    P = np.asarray(P, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if P.shape != theta.shape:
        raise ValueError(f"P {P.shape} and Theta {theta.shape} differ in size")
    lam = min_eig_hermitian(P, theta)
    return HeisenbergReport(lam, lam >= -tol)
