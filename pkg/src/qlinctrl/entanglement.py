"""Two-mode separability, logarithmic negativity and randomized no-go checks.

Covariances use the library convention (vacuum covariance ``I``). The
negativity quantities ``delta_tilde`` and ``nu`` are reported in units where
the vacuum variance is 1/2, i.e. computed from ``P11 / 2``; in these units
the state is entangled exactly when ``2 nu < 1`` and
``E_N = max(0, -ln(2 nu))``.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from .covariance import (
    is_hurwitz,
    matrix_exponential,
    min_eig_hermitian,
    propagate,
    solve_steady_state,
)
from .interconnect import (
    ControllerSpec,
    WiringSpec,
    assemble,
    compose_closed_loop,
    partial_transpose_frame,
)
from .model import (
    J,
    LMI_TOL,
    OscillatorSpec,
    quadrature_matrices,
    to_quadrature,
    vacuum_field,
)

__all__ = [
    "InvalidCovarianceError",
    "EntanglementReport",
    "NoGoReport",
    "THETA_LOCAL",
    "THETA_PT",
    "separability_lmi",
    "log_negativity",
    "sudden_death_time",
    "random_realizable_system",
    "random_separable_covariance",
    "random_two_mode_covariance",
    "random_closed_loop",
    "verify_no_go",
]

log = logging.getLogger(__name__)

_Z2 = np.zeros((2, 2))
THETA_LOCAL = np.block([[J, _Z2], [_Z2, J]])
THETA_PT = np.block([[J, _Z2], [_Z2, -J]])
for _a in (THETA_LOCAL, THETA_PT):
    _a.setflags(write=False)

HEISENBERG_TOL = 1e-8
NO_GO_TOL = 1e-8
RADICAND_CLAMP = 1e-12


class InvalidCovarianceError(ValueError):
    """The matrix is not the covariance of any two-mode quantum state."""


def _two_mode(P11):
    P11 = np.asarray(P11, dtype=float)
    if P11.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-mode covariance, got {P11.shape}")
    if not np.allclose(P11, P11.T, rtol=0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    return (P11 + P11.T) / 2


def _require_physical(P11):
    lam = min_eig_hermitian(P11, THETA_LOCAL)
    if lam < -HEISENBERG_TOL:
        raise InvalidCovarianceError(
            f"P11 + i diag(J, J) has eigenvalue {lam:.3e}; not a quantum covariance"
        )


def separability_lmi(P11):
    """``lambda_min(P11 + i diag(J, -J))``; nonnegative iff the state is separable."""
    P11 = _two_mode(P11)
    _require_physical(P11)
    return min_eig_hermitian(P11, THETA_PT)


@dataclass(frozen=True)
class EntanglementReport:
    delta_tilde: float
    nu: float
    E_N: float
    sep_min_eig: float
    verdict: str

    @property
    def separable(self):
        return self.verdict == "separable"

    @property
    def log_ratio(self):
        """``-ln(2 nu)`` before clipping at zero; crosses zero at the separability boundary."""
        return -np.log(2 * self.nu)


def _negativity_terms(P11):
    half = P11 / 2
    d1 = np.linalg.det(half[:2, :2])
    d2 = np.linalg.det(half[:2, 2:])
    d3 = np.linalg.det(half[2:, 2:])
    delta = d1 + d3 - 2 * d2
    rad = delta**2 - 4 * np.linalg.det(half)
    if rad < 0:
        if rad < -RADICAND_CLAMP:
            raise ArithmeticError(f"negativity radicand {rad:.3e} is negative")
        rad = 0.0
    inner = max(delta - np.sqrt(rad), 0.0)
    return float(delta), float(np.sqrt(inner / 2))


def log_negativity(P11, tol=LMI_TOL, validate=True):
    """Logarithmic negativity of a two-mode Gaussian state.

    Cross-checks the negativity against the partial-transpose LMI and raises
    ``RuntimeError`` if the two disagree clearly.
    """
    P11 = _two_mode(P11)
    if validate:
        _require_physical(P11)
    delta, nu = _negativity_terms(P11)
    E_N = max(0.0, -np.log(2 * nu)) if nu > 0 else np.inf
    sep = min_eig_hermitian(P11, THETA_PT)
    verdict = "separable" if sep >= -tol else "entangled"
    if validate:
        # disagreement only counts away from the shared tolerance band
        margin = 100 * tol
        if (sep < -margin and E_N <= tol) or (E_N > margin and sep >= -tol):
            raise RuntimeError(
                f"separability criteria disagree: lambda_min={sep:.3e}, E_N={E_N:.3e}"
            )
    return EntanglementReport(delta, nu, float(E_N), sep, verdict)


def sudden_death_time(traj, tol=LMI_TOL):
    """Time after which the two-mode block of ``traj`` stays separable.

    Returns ``None`` if the state is still entangled at the last sample and
    0.0 if it never was. Otherwise the crossing is refined by linear
    interpolation of ``-ln(2 nu)`` between the bracketing samples.
    """
    reports = [log_negativity(P) for P in traj.block(4)]
    E = np.array([r.E_N for r in reports])
    above = np.nonzero(E > tol)[0]
    if above.size == 0:
        return 0.0
    k = above[-1] + 1
    if k == len(E):
        return None
    t0, t1 = traj.times[k - 1], traj.times[k]
    g0, g1 = reports[k - 1].log_ratio, reports[k].log_ratio
    if g0 == g1:
        return float(t1)
    frac = min(max(g0 / (g0 - g1), 0.0), 1.0)
    return float(t0 + frac * (t1 - t0))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _draw_RK(rng, n, m, zero_coupling=False):
    R = rng.uniform(-1, 1, (2 * n, 2 * n))
    R = np.triu(R) + np.triu(R, 1).T
    if zero_coupling:
        return R, np.zeros((m, 2 * n), dtype=complex)
    # uniform on the unit disk
    radius = np.sqrt(rng.uniform(0, 1, (m, 2 * n)))
    return R, radius * np.exp(2j * np.pi * rng.uniform(0, 1, (m, 2 * n)))


def random_realizable_system(seed, n=1, m=1, zero_coupling=False):
    """Random ``OscillatorSpec`` with ``S = I``; reproducible from ``seed``.

    ``R`` has entries in [-1, 1] and ``K`` entries in the closed unit disk.
    """
    R, K = _draw_RK(_rng(seed), n, m, zero_coupling)
    return OscillatorSpec(R, K, np.eye(m))


def _random_local(rng):
    # one-mode covariance nu * Rot diag(e^r, e^-r) Rot^T with nu >= 1
    phi = rng.uniform(0, np.pi)
    c, s = np.cos(phi), np.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    r = rng.uniform(-1, 1)
    return rng.uniform(1, 3) * rot @ np.diag([np.exp(r), np.exp(-r)]) @ rot.T


def random_separable_covariance(seed, max_attempts=10_000):
    """Random separable two-mode covariance.

    Draws ``diag(V_A, V_B) + W`` with valid local covariances ``V_A``,
    ``V_B`` and a random PSD classical correlation ``W``, and keeps the
    first draw that passes both the uncertainty and the separability LMI.
    """
    rng = _rng(seed)
    for _ in range(max_attempts):
        G = rng.normal(scale=0.4, size=(4, 4))
        P = block_diag(_random_local(rng), _random_local(rng)) + G @ G.T
        P = (P + P.T) / 2
        if min_eig_hermitian(P, THETA_LOCAL) >= 0 and min_eig_hermitian(P, THETA_PT) >= 0:
            return P
    raise RuntimeError("separable covariance sampler failed; generator bug")


def random_two_mode_covariance(seed):
    """Random valid two-mode covariance, entangled or not.

    ``S diag(nu1, nu1, nu2, nu2) S^T`` with thermal factors ``nu >= 1`` and
    ``S = exp(diag(J, J) H)`` symplectic for a random symmetric ``H``.
    """
    rng = _rng(seed)
    H = rng.normal(scale=0.5, size=(4, 4))
    S = matrix_exponential(THETA_LOCAL @ (H + H.T) / 2)
    nu1, nu2 = 1 + rng.exponential(0.3, size=2)
    P = S @ np.diag([nu1, nu1, nu2, nu2]) @ S.T
    return (P + P.T) / 2


class _Plant(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n: int
    m: int
    theta: np.ndarray


def _draw_loop_parts(rng, max_fields, max_nc):
    specs, measure, modulate, M = [], [], [], []
    for _ in range(2):
        m = int(rng.integers(1, max_fields + 1))
        R, K = _draw_RK(rng, 1, m)
        specs.append((R, K, np.eye(m)))
        roles = rng.integers(0, 3, size=m)
        measure.append(tuple(2 * j + int(rng.integers(0, 2)) for j in range(m) if roles[j] == 0))
        modulate.append(tuple(j for j in range(m) if roles[j] == 1))
        M.append(rng.uniform(-1, 1, (2, 2)))
    wiring = WiringSpec(tuple(measure), tuple(modulate), tuple(M))
    n_c = int(rng.integers(1, max_nc + 1))
    ctrl = ControllerSpec(
        rng.uniform(-1, 1, (n_c, n_c)),
        rng.uniform(-1, 1, (n_c, wiring.n_measurements)),
        tuple(rng.uniform(-1, 1, (2, n_c)) for _ in range(2)),
        tuple(rng.uniform(-1, 1, (2 * len(f), n_c)) for f in modulate),
    )
    return specs, ctrl, wiring


def _build(parts):
    specs, ctrl, wiring = parts
    G1, G2 = (to_quadrature(OscillatorSpec(*s), vacuum_field(s[1].shape[0])) for s in specs)
    return compose_closed_loop(G1, G2, ctrl, wiring)


def _screen_drift(parts):
    specs, ctrl, wiring = parts
    plants = []
    for R, K, S in specs:
        A, B, C, D = quadrature_matrices(R, K, S)
        plants.append(_Plant(A.real, B.real, C, D, 1, K.shape[0], J))
    return assemble(plants, ctrl, wiring)[0]


def random_closed_loop(rng, max_fields=2, max_nc=3, hurwitz=False, max_resamples=1000):
    """Random single-mode plants, wiring and controller composed into a loop.

    Each plant couples to 1..``max_fields`` vacuum fields; each field is
    independently measured (in a random quadrature), displaced by the
    controller, or left alone. With ``hurwitz=True`` the whole draw is
    repeated until the closed loop is Hurwitz; candidates are screened on
    the raw drift matrix and only the accepted one is built and validated.
    """
    for _ in range(max_resamples):
        parts = _draw_loop_parts(rng, max_fields, max_nc)
        if not hurwitz or is_hurwitz(_screen_drift(parts)).stable:
            cl = _build(parts)
            if not hurwitz or is_hurwitz(cl.A).stable:
                return cl
    raise RuntimeError(f"no Hurwitz closed loop in {max_resamples} draws")


@dataclass
class NoGoReport:
    trials: int
    steady_passed: int = 0
    transient_passed: int = 0
    worst_steady_margin: float = np.inf
    worst_transient_margin: float = np.inf
    worst_transient_EN: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return self.steady_passed == self.trials and self.transient_passed == self.trials

    def summary(self):
        return {
            "trials": self.trials,
            "steady_passed": self.steady_passed,
            "transient_passed": self.transient_passed,
            "worst_steady_margin": self.worst_steady_margin,
            "worst_transient_margin": self.worst_transient_margin,
            "worst_transient_E_N": self.worst_transient_EN,
            "ok": self.ok,
        }


def _dump(cl, **extra):
    return {"A": cl.A.tolist(), "B": cl.B.tolist(), "partition": list(cl.partition), **extra}


def _noise(cl, fault):
    Q = cl.noise_covariance
    return -Q if fault == "negate-noise" else Q


def _transient_horizon(alpha):
    if alpha < 0:
        return 20.0 / abs(alpha)
    # unstable loops: keep covariance growth to a few e-folds
    return min(2.0 / max(alpha, 1e-3), 20.0)


def verify_no_go(seed, trials, steps=200, fault=None, max_resamples=1000):
    """Randomized check that classical feedback neither creates nor keeps entanglement.

    Each trial draws a random loop. The steady-state leg redraws until the
    loop is Hurwitz and checks the separability margin of the steady
    state. The transient leg keeps the first draw, Hurwitz or not, starts
    from a random separable state and checks every sample of the
    trajectory. ``fault="negate-noise"`` flips the sign of the noise drive
    and exists only to prove the check can fail.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = NoGoReport(trials)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        first = random_closed_loop(rng)
        partial_transpose_frame(first)

        cl = random_closed_loop(rng, hurwitz=True, max_resamples=max_resamples)
        partial_transpose_frame(cl)
        P = solve_steady_state(cl.A, _noise(cl, fault))
        margin = min_eig_hermitian(P[:4, :4], THETA_PT)
        report.worst_steady_margin = min(report.worst_steady_margin, margin)
        if margin >= -NO_GO_TOL:
            report.steady_passed += 1
        else:
            report.failures.append(_dump(cl, trial=trial, leg="steady", margin=margin))

        cl = first
        alpha = is_hurwitz(cl.A).abscissa
        times = np.linspace(0.0, _transient_horizon(alpha), steps + 1)
        P0 = block_diag(random_separable_covariance(rng), np.zeros((cl.n_c, cl.n_c)))
        traj = propagate(cl.A, _noise(cl, fault), P0, times, cl.partition)
        margins = traj.min_eigs(THETA_PT)
        E_N = np.array([_unchecked_EN(P) for P in traj.block(4)])
        worst_margin, worst_EN = float(margins.min()), float(np.nanmax(E_N, initial=0.0))
        if np.isnan(E_N).any():
            worst_EN = np.inf
        report.worst_transient_margin = min(report.worst_transient_margin, worst_margin)
        report.worst_transient_EN = max(report.worst_transient_EN, worst_EN)
        if worst_margin >= -NO_GO_TOL and worst_EN <= NO_GO_TOL:
            report.transient_passed += 1
        else:
            report.failures.append(
                _dump(cl, trial=trial, leg="transient", margin=worst_margin,
                      E_N=worst_EN, P0=P0.tolist())
            )
    log.info("no-go verification: %s", report.summary())
    return report


def _unchecked_EN(P11):
    try:
        return log_negativity(P11, validate=False).E_N
    except (ArithmeticError, ValueError):
        return np.nan
