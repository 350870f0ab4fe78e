"""Dense kernels for covariance dynamics.

Steady-state and transient solutions of the Lyapunov equation
``dP/dt = A P + P A^T + Q`` plus the small linear-algebra primitives they
rest on. Everything here is sized for desk-scale problems (dimension of a
dozen or so), so clarity wins over asymptotic cost.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "LyapunovError",
    "CovarianceTrajectory",
    "HurwitzReport",
    "matrix_exponential",
    "min_eig_hermitian",
    "is_hurwitz",
    "solve_steady_state",
    "propagate",
    "propagate_piecewise",
    "default_time_grid",
]


class LyapunovError(ValueError):
    """Raised when a Lyapunov problem is ill-posed or numerically unsolvable."""


# Degree-13 Pade coefficients and the matching 1-norm threshold
# (Higham, SIAM J. Matrix Anal. Appl. 26(4), 2005).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def matrix_exponential(M):
    """``exp(M)`` by scaling and squaring with a [13/13] Pade approximant."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix_exponential input has non-finite entries")
    d = M.shape[0]
    if d == 0:
        return np.zeros((0, 0))

    norm = np.linalg.norm(M, 1)
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
    X = M / 2.0**s

    # normalised so that exp(0) comes out as I exactly
    b = [c / _PADE13[0] for c in _PADE13]
    I = np.eye(d)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    U = X @ (
        X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
        + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * I
    )
    V = (
        X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
        + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * I
    )
    E = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            E = E @ E
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflowed")
    return E


def min_eig_hermitian(X, Y):
    """Smallest eigenvalue of the Hermitian matrix ``X + iY``.

    Uses the real symmetric embedding ``[[X, -Y], [Y, X]]``, whose spectrum
    is that of ``X + iY`` with every eigenvalue doubled.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"X {X.shape} and Y {Y.shape} must be square and equal in size")
    if X.shape[0] == 0:
        return 0.0
    H = np.block([[X, -Y], [Y, X]])
    return float(np.linalg.eigvalsh((H + H.T) / 2)[0])


class HurwitzReport(NamedTuple):
    stable: bool
    abscissa: float


def is_hurwitz(A):
    """Whether every eigenvalue of ``A`` has negative real part.

    Also returns the spectral abscissa (largest real part).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"is_hurwitz needs a square matrix, got {A.shape}")
    if A.shape[0] == 0:
        return HurwitzReport(True, -np.inf)
    alpha = float(np.linalg.eigvals(A).real.max())
    return HurwitzReport(alpha < 0, alpha)


def solve_steady_state(A, Q):
    """Solve ``A P + P A^T + Q = 0`` for symmetric ``P``.

    ``A`` must be Hurwitz. The equation is vectorised as
    ``(I kron A + A kron I) vec(P) = -vec(Q)`` and solved by dense LU.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or Q.shape != (d, d):
        raise LyapunovError(f"A {A.shape} and Q {Q.shape} must be square and equal in size")
    stable, alpha = is_hurwitz(A)
    if not stable:
        raise LyapunovError(f"A is not Hurwitz (spectral abscissa {alpha:.6g}); no steady state")
    I = np.eye(d)
    L = np.kron(I, A) + np.kron(A, I)
    try:
        # column-major vec matches kron(I, A) acting on columns of P
        vecP = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise LyapunovError("Lyapunov operator is singular") from exc
    P = vecP.reshape((d, d), order="F")
    P = (P + P.T) / 2
    residual = np.linalg.norm(A @ P + P @ A.T + Q)
    if residual > 1e-10 * (1 + np.linalg.norm(Q)):
        raise LyapunovError(f"steady-state residual {residual:.3e} exceeds tolerance")
    return P


@dataclass(frozen=True, eq=False)
class CovarianceTrajectory:
    """Sampled solution ``P(t)`` of the Lyapunov differential equation."""

    times: np.ndarray
    P: np.ndarray
    partition: tuple = field(default=())

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 3 or P.shape[0] != times.shape[0]:
            raise ValueError("one covariance matrix is required per time sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "P", P)

    def __len__(self):
        return len(self.times)

    def block(self, size=4):
        """The leading ``size x size`` block of every sample."""
        return self.P[:, :size, :size]

    def min_eigs(self, theta):
        """``lambda_min(P(t) + i theta)`` for every sample."""
        theta = np.asarray(theta, dtype=float)
        k = theta.shape[0]
        return np.array([min_eig_hermitian(P[:k, :k], theta) for P in self.P])


def default_time_grid(A, steps=2000, t_end=None):
    """Uniform grid on ``[0, t_end]``; ``t_end`` defaults to ``10 / |abscissa|``."""
    if t_end is None:
        stable, alpha = is_hurwitz(A)
        if not stable:
            raise LyapunovError("a default horizon needs a Hurwitz matrix; pass t_end")
        t_end = 10.0 / abs(alpha)
    if t_end == 0:
        return np.zeros(1)
    return np.linspace(0.0, t_end, steps + 1)


def _van_loan(A, Q, h):
    # exp([[-A, Q], [0, A^T]] h) = [[., F12], [0, F22]]; Phi = F22^T, G = F22^T F12
    d = A.shape[0]
    M = np.zeros((2 * d, 2 * d))
    M[:d, :d] = -A
    M[:d, d:] = Q
    M[d:, d:] = A.T
    E = matrix_exponential(M * h)
    Phi = E[d:, d:].T
    G = Phi @ E[:d, d:]
    return Phi, (G + G.T) / 2


def _check_inputs(A, Q, P0, times):
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    times = np.asarray(times, dtype=float).reshape(-1)
    d = A.shape[0]
    if A.shape != (d, d) or Q.shape != (d, d) or P0.shape != (d, d):
        raise LyapunovError("A, Q and P0 must be square and equal in size")
    for name, arr in (("A", A), ("Q", Q), ("P0", P0), ("times", times)):
        if not np.all(np.isfinite(arr)):
            raise LyapunovError(f"{name} has non-finite entries")
    if not np.allclose(P0, P0.T, rtol=0, atol=1e-12):
        raise LyapunovError("P0 must be symmetric")
    if times.size == 0 or times[0] != 0:
        raise LyapunovError("time grid must start at 0")
    if np.any(np.diff(times) <= 0):
        raise LyapunovError("time grid must be strictly increasing")
    return A, Q, (P0 + P0.T) / 2, times


def propagate(A, Q, P0, times, partition=()):
    """Solve ``dP/dt = A P + P A^T + Q`` exactly on the grid ``times``.

    Each step applies ``P <- Phi P Phi^T + G_h`` with ``Phi = exp(A h)`` and
    ``G_h`` the integral of ``exp(A s) Q exp(A^T s)`` over one step, both read
    off a single augmented exponential.
    """
    A, Q, P, times = _check_inputs(A, Q, P0, times)
    out = np.empty((times.size,) + P.shape)
    out[0] = P
    cached_h, step = None, None
    for k, h in enumerate(np.diff(times), start=1):
        if cached_h is None or abs(h - cached_h) > 1e-13 * cached_h:
            cached_h, step = h, _van_loan(A, Q, h)
        Phi, G = step
        P = Phi @ P @ Phi.T + G
        P = (P + P.T) / 2
        out[k] = P
    return CovarianceTrajectory(times, out, tuple(partition))


def propagate_piecewise(segments, P0, times, partition=()):
    """Propagate through piecewise-constant ``(A, Q)`` data.

    ``segments`` is a sequence of ``(t_start, A, Q)`` sorted by ``t_start``
    with the first segment starting at 0; segment ``k`` is active on
    ``[t_start_k, t_start_{k+1})``. Switching instants need not lie on the
    sample grid.
    """
    segments = list(segments)
    if not segments or segments[0][0] != 0:
        raise LyapunovError("the first segment must start at t = 0")
    starts = np.array([s[0] for s in segments], dtype=float)
    if np.any(np.diff(starts) <= 0):
        raise LyapunovError("segment start times must be strictly increasing")
    A0, Q0, P, times = _check_inputs(segments[0][1], segments[0][2], P0, times)

    # merge sample times and switching instants into one sweep
    knots = np.union1d(times, starts[starts < times[-1]])
    out = np.empty((times.size,) + P.shape)
    out[0] = P
    sample = 1
    for t0, t1 in zip(knots[:-1], knots[1:]):
        seg = np.searchsorted(starts, t0, side="right") - 1
        _, A, Q = segments[seg]
        Phi, G = _van_loan(np.asarray(A, float), np.asarray(Q, float), t1 - t0)
        P = Phi @ P @ Phi.T + G
        P = (P + P.T) / 2
        if sample < times.size and t1 == times[sample]:
            out[sample] = P
            sample += 1
    return CovarianceTrajectory(times, out, tuple(partition))
