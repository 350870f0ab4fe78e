"""Closing the loop between two quantum plants and a classical controller.

Two plants ``G1`` and ``G2`` talk only through a finite-dimensional linear
controller with state ``z``. The controller integrates homodyne records
``dm = Sel_k (C_k x_k dt + D_k dw_k)`` and acts back on each plant in two
ways: a linear Hamiltonian term ``u_{1,k}^T M_k x_k`` and a classical
displacement of selected input fields. The closed loop is a mixed
quantum-classical system ``dx = At x dt + Bt dw`` over ``x = (x_1, x_2, z)``
and ``w = (w_1, w_2)``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from .model import (
    REALIZABILITY_TOL,
    ConstructionError,
    commutation_matrix,
    realizability_residual,
)

__all__ = [
    "CompositionError",
    "ControllerSpec",
    "WiringSpec",
    "ClosedLoop",
    "StructureReport",
    "assemble",
    "compose_closed_loop",
    "compose_schedule",
    "validate_block_structure",
    "partial_transpose_frame",
    "closed_loop_residual",
]


class CompositionError(ConstructionError):
    """The plants, controller and wiring do not form a valid closed loop."""


def _mat(a, shape, name):
    if a is None:
        return np.zeros(shape)
    arr = np.asarray(a, dtype=float)
    if arr.size == 0 and 0 in shape:
        return np.zeros(shape)
    arr = np.atleast_2d(arr)
    if arr.shape != shape:
        raise CompositionError(f"{name} must be {shape[0]} x {shape[1]}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise CompositionError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class WiringSpec:
    """Which quadratures are measured and which inputs are displaced.

    ``measure[k]`` lists output rows of plant ``k`` fed to the controller
    (row ``2j`` is the amplitude and ``2j + 1`` the phase quadrature of
    field ``j``). ``modulate[k]`` lists input fields of plant ``k`` that the
    controller displaces. ``M[k]`` is the 2x2 Hamiltonian modulation matrix
    of plant ``k``, or ``None`` for no Hamiltonian actuation.
    """

    measure: tuple = ((), ())
    modulate: tuple = ((), ())
    M: tuple = (None, None)

    def __post_init__(self):
        measure = tuple(tuple(int(r) for r in rows) for rows in self.measure)
        modulate = tuple(tuple(int(f) for f in fields) for fields in self.modulate)
        M = tuple(None if Mk is None else np.array(Mk, dtype=float) for Mk in self.M)
        if not (len(measure) == len(modulate) == len(M) == 2):
            raise CompositionError("wiring must describe exactly two plants")
        for k in range(2):
            fields = [r // 2 for r in measure[k]]
            if len(set(fields)) != len(fields):
                raise CompositionError(
                    f"plant {k + 1}: at most one quadrature per field may be measured"
                )
            if len(set(modulate[k])) != len(modulate[k]):
                raise CompositionError(f"plant {k + 1}: a field is modulated twice")
            overlap = set(fields) & set(modulate[k])
            if overlap:
                raise CompositionError(
                    f"plant {k + 1}: fields {sorted(overlap)} are both measured and modulated"
                )
            if min(measure[k] + modulate[k], default=0) < 0:
                raise CompositionError(f"plant {k + 1}: negative selector index")
            if M[k] is not None and M[k].shape != (2, 2):
                raise CompositionError(f"M[{k}] must be 2 x 2")
        object.__setattr__(self, "measure", measure)
        object.__setattr__(self, "modulate", modulate)
        object.__setattr__(self, "M", M)

    @property
    def n_measurements(self):
        return len(self.measure[0]) + len(self.measure[1])

    def measurement_selector(self, k, m_k):
        """0/1 matrix picking the measured rows out of plant ``k``'s output."""
        rows = self.measure[k]
        if any(r >= 2 * m_k for r in rows):
            raise CompositionError(f"plant {k + 1}: measured row out of range for m={m_k}")
        sel = np.zeros((len(rows), 2 * m_k))
        sel[np.arange(len(rows)), rows] = 1.0
        return sel

    def modulation_columns(self, k, m_k):
        """Quadrature columns of plant ``k``'s input that receive a displacement."""
        if any(f >= m_k for f in self.modulate[k]):
            raise CompositionError(f"plant {k + 1}: modulated field out of range for m={m_k}")
        return [c for f in self.modulate[k] for c in (2 * f, 2 * f + 1)]


@dataclass(frozen=True, eq=False)
class ControllerSpec:
    """Classical linear controller ``dz = A_c z dt + B_c dm``.

    ``C_ham[k]`` (2 x n_c) produces the Hamiltonian modulation signal of
    plant ``k``; ``C_mod[k]`` (2 * #modulated fields x n_c) produces the
    quadrature displacements of plant ``k``'s modulated inputs. Either may
    be ``None`` to mean zero.
    """

    A_c: np.ndarray
    B_c: np.ndarray
    C_ham: tuple = (None, None)
    C_mod: tuple = (None, None)

    def __post_init__(self):
        A_c = np.asarray(self.A_c, dtype=float)
        A_c = np.zeros((0, 0)) if A_c.size == 0 else np.atleast_2d(A_c)
        n_c = A_c.shape[0]
        if A_c.shape != (n_c, n_c):
            raise CompositionError(f"A_c must be square, got {A_c.shape}")
        B_c = np.asarray(self.B_c, dtype=float)
        if B_c.size == 0:
            B_c = np.zeros((n_c, 0))
        elif B_c.ndim < 2 or B_c.shape[0] != n_c:
            raise CompositionError(f"B_c must have {n_c} rows, got shape {B_c.shape}")
        if not (np.all(np.isfinite(A_c)) and np.all(np.isfinite(B_c))):
            raise CompositionError("controller matrices must be finite")
        if len(self.C_ham) != 2 or len(self.C_mod) != 2:
            raise CompositionError("controller must describe outputs for exactly two plants")
        C_ham = tuple(None if c is None else _mat(c, (2, n_c), f"C_ham[{k}]")
                      for k, c in enumerate(self.C_ham))
        C_mod = []
        for k, c in enumerate(self.C_mod):
            if c is not None:
                c = np.asarray(c, dtype=float)
                c = np.zeros((0, n_c)) if c.size == 0 else np.atleast_2d(c)
                if c.shape[1] != n_c or c.shape[0] % 2:
                    raise CompositionError(
                        f"C_mod[{k}] must have an even number of rows and {n_c} columns, got {c.shape}"
                    )
            C_mod.append(c)
        object.__setattr__(self, "A_c", A_c)
        object.__setattr__(self, "B_c", B_c)
        object.__setattr__(self, "C_ham", C_ham)
        object.__setattr__(self, "C_mod", tuple(C_mod))

    @property
    def n_c(self):
        return self.A_c.shape[0]

    @classmethod
    def zero(cls, n_c, n_measurements, n_modulated=(0, 0)):
        """Controller with every matrix zero: the plants evolve independently."""
        return cls(
            np.zeros((n_c, n_c)),
            np.zeros((n_c, n_measurements)),
            (np.zeros((2, n_c)), np.zeros((2, n_c))),
            tuple(np.zeros((2 * f, n_c)) for f in n_modulated),
        )


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Mixed quantum-classical system ``dx = A x dt + B dw``.

    ``partition`` holds the sizes of ``(x_1, x_2, z)`` and ``noise_partition``
    the sizes of ``(w_1, w_2)``.
    """

    A: np.ndarray
    B: np.ndarray
    partition: tuple
    noise_partition: tuple
    S_w: np.ndarray
    T_w: np.ndarray
    plants: tuple = field(default=(), repr=False)

    def __post_init__(self):
        for name in ("A", "B", "S_w"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        T_w = np.array(self.T_w, dtype=complex)
        T_w.setflags(write=False)
        object.__setattr__(self, "T_w", T_w)
        d, w = sum(self.partition), sum(self.noise_partition)
        if self.A.shape != (d, d) or self.B.shape != (d, w):
            raise CompositionError("closed-loop matrices do not match the partition")

    @property
    def n_c(self):
        return self.partition[2]

    @property
    def theta(self):
        """Degenerate commutation matrix ``diag(Theta_1, Theta_2, 0)``."""
        n1, n2, n_c = self.partition
        return block_diag(commutation_matrix(n1 // 2), commutation_matrix(n2 // 2), np.zeros((n_c, n_c)))

    @property
    def noise_covariance(self):
        """``B S_w B^T``, the drive term of the covariance equation."""
        return self.B @ self.S_w @ self.B.T

    @property
    def quantum_size(self):
        return self.partition[0] + self.partition[1]


def assemble(plants, ctrl, wiring):
    """Closed-loop ``(A, B)`` without any physical validation.

    ``plants`` are two objects exposing ``A, B, C, D, n, m, theta``. Drift
    blocks are ``A_k3 = B_k[:, mod_k] C_mod_k + 2 Theta_k M_k^T C_ham_k``
    (controller to plant), ``A_3k = B_c^(k) Sel_k C_k`` (plant to
    controller) and ``A_33 = A_c``; the controller also picks up the
    measurement noise through ``B_3k = B_c^(k) Sel_k D_k``.
    """
    n_c = ctrl.n_c
    if ctrl.B_c.shape[1] != wiring.n_measurements:
        raise CompositionError(
            f"B_c has {ctrl.B_c.shape[1]} columns but the wiring measures "
            f"{wiring.n_measurements} quadratures"
        )
    sizes = [2 * G.n for G in plants]
    noise = [2 * G.m for G in plants]
    d = sizes[0] + sizes[1] + n_c
    A = np.zeros((d, d))
    B = np.zeros((d, sum(noise)))
    rows = [slice(0, sizes[0]), slice(sizes[0], sizes[0] + sizes[1])]
    zrows = slice(sizes[0] + sizes[1], d)
    cols = [slice(0, noise[0]), slice(noise[0], noise[0] + noise[1])]

    B_c_split = np.split(ctrl.B_c, [len(wiring.measure[0])], axis=1)
    for k, G in enumerate(plants):
        A[rows[k], rows[k]] = G.A
        B[rows[k], cols[k]] = G.B

        mod_cols = wiring.modulation_columns(k, G.m)
        C_mod = ctrl.C_mod[k]
        if C_mod is None:
            C_mod = np.zeros((len(mod_cols), n_c))
        if C_mod.shape != (len(mod_cols), n_c):
            raise CompositionError(
                f"C_mod[{k}] must be {len(mod_cols)} x {n_c} for the wired modulators, got {C_mod.shape}"
            )
        drive = G.B[:, mod_cols] @ C_mod
        if ctrl.C_ham[k] is not None and np.any(ctrl.C_ham[k]) and wiring.M[k] is None:
            raise CompositionError(f"plant {k + 1}: Hamiltonian modulation needs both C_ham and M")
        if ctrl.C_ham[k] is not None and wiring.M[k] is not None:
            if G.n != 1:
                raise CompositionError("Hamiltonian modulation is defined for single-mode plants")
            drive = drive + 2 * G.theta @ wiring.M[k].T @ ctrl.C_ham[k]
        A[rows[k], zrows] = drive

        sel = wiring.measurement_selector(k, G.m)
        A[zrows, rows[k]] = B_c_split[k] @ sel @ G.C
        B[zrows, cols[k]] = B_c_split[k] @ sel @ G.D
    A[zrows, zrows] = ctrl.A_c
    return A, B


def compose_closed_loop(G1, G2, ctrl, wiring):
    """Assemble and validate the closed loop of two plants and a controller.

    The plants must be physically realizable; the result is checked for
    the plant-plant zero blocks and for preservation of the (degenerate)
    commutation relations.
    """
    plants = (G1, G2)
    for k, G in enumerate(plants):
        res = realizability_residual(G)
        if res > REALIZABILITY_TOL:
            raise CompositionError(f"plant {k + 1} is not physically realizable (residual {res:.3e})")
    A, B = assemble(plants, ctrl, wiring)
    cl = ClosedLoop(
        A,
        B,
        (2 * G1.n, 2 * G2.n, ctrl.n_c),
        (2 * G1.m, 2 * G2.m),
        block_diag(G1.field.S_w, G2.field.S_w),
        block_diag(G1.field.T_w, G2.field.T_w),
        plants,
    )
    report = validate_block_structure(cl)
    if not report.ok:
        raise CompositionError(f"assembled loop couples the plants directly: {report.violations}")
    res = closed_loop_residual(cl)
    if res > REALIZABILITY_TOL:
        raise CompositionError(f"closed loop violates commutation preservation (residual {res:.3e})")
    return cl


def compose_schedule(G1, G2, schedule, wiring):
    """Closed loops for a piecewise-constant controller schedule.

    ``schedule`` is a sequence of ``(t_start, ControllerSpec)``; the result
    is a list of ``(t_start, ClosedLoop)`` ready for
    :func:`qlinctrl.covariance.propagate_piecewise`.
    """
    out = []
    for t, ctrl in schedule:
        if out and ctrl.n_c != out[0][1].n_c:
            raise CompositionError("controller state dimension must stay fixed across segments")
        out.append((float(t), compose_closed_loop(G1, G2, ctrl, wiring)))
    return out


class StructureReport(NamedTuple):
    ok: bool
    max_abs: dict
    violations: list


def validate_block_structure(cl):
    """Check that the plants are coupled only through the controller.

    The forbidden blocks are the plant-plant drift blocks ``(1,2)``,
    ``(2,1)`` and the cross-noise blocks ``B_12`` (plant 1 driven by ``w_2``)
    and ``B_21``. All must be exactly zero.
    """
    n1, n2, _ = cl.partition
    m1, _ = cl.noise_partition
    p1, p2 = slice(0, n1), slice(n1, n1 + n2)
    w1, w2 = slice(0, m1), slice(m1, None)
    blocks = {
        "A(1,2)": cl.A[p1, p2],
        "A(2,1)": cl.A[p2, p1],
        "B(1,2)": cl.B[p1, w2],
        "B(2,1)": cl.B[p2, w1],
    }
    max_abs = {k: float(np.abs(v).max(initial=0.0)) for k, v in blocks.items()}
    violations = [k for k, v in max_abs.items() if v != 0.0]
    return StructureReport(not violations, max_abs, violations)


def closed_loop_residual(cl, theta=None, T_w=None):
    """Frobenius norm of ``A Theta + Theta A^T - i B T_w B^T``."""
    theta = cl.theta if theta is None else theta
    T_w = cl.T_w if T_w is None else T_w
    M = cl.A @ theta + theta @ cl.A.T - 1j * cl.B @ T_w @ cl.B.T
    return float(np.linalg.norm(M))


def partial_transpose_frame(cl, tol=REALIZABILITY_TOL):
    """Partially transposed commutation data ``(Theta_hat, T_hat_w)``.

    ``Theta_hat = diag(Theta_1, -Theta_2, 0)`` and
    ``T_hat_w = diag(T_w1, -T_w2)``. Because the plants are coupled only
    classically, the loop preserves this flipped commutation structure too;
    a residual above ``tol`` signals a non-physical composition.
    """
    n1, n2, n_c = cl.partition
    m1, m2 = cl.noise_partition
    theta_hat = block_diag(
        commutation_matrix(n1 // 2), -commutation_matrix(n2 // 2), np.zeros((n_c, n_c))
    )
    T_hat = np.array(cl.T_w, dtype=complex)
    T_hat[m1:, m1:] *= -1
    res = closed_loop_residual(cl, theta_hat, T_hat)
    if res > tol:
        raise CompositionError(f"flipped commutation identity fails (residual {res:.3e})")
    return theta_hat, T_hat
