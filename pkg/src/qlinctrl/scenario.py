"""Scenario files and the runs behind the command line.

A scenario is a TOML document describing two plants, their fields, the
wiring, the classical controller, an initial two-mode covariance and a
time grid. Complex numbers are written as ``[re, im]`` pairs.

.. code-block:: toml

    [[plants]]
    R = [[0.0, 0.0], [0.0, 0.0]]
    K = [[[0.05, 0.0], [0.0, 0.05]]]
    S = [[[1.0, 0.0]]]
    field = "vacuum"          # or an explicit S_w matrix
    measure = []              # output rows fed to the controller
    modulate = [0]            # input fields displaced by the controller
    C_mod = [[1.0], [1.0]]    # optional; M and C_ham likewise

    [controller]
    A_c = [[-1.0]]
    B_c = [[1.0]]

    [initial]
    units = "vacuum-half"     # or "library"
    P11 = [[...], ...]

    [time_grid]
    steps = 2000              # t_end defaults to 10 / |spectral abscissa|
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import tomli
import tomli_w

from . import example
from .covariance import (
    default_time_grid,
    is_hurwitz,
    min_eig_hermitian,
    propagate,
    solve_steady_state,
)
from .entanglement import (
    InvalidCovarianceError,
    log_negativity,
    sudden_death_time,
)
from .interconnect import ControllerSpec, WiringSpec, compose_closed_loop
from .model import (
    LMI_TOL,
    ConstructionError,
    ItoFieldSpec,
    OscillatorSpec,
    commutation_matrix,
    to_quadrature,
    vacuum_field,
)

__all__ = [
    "ConfigError",
    "NotHurwitzError",
    "ScenarioConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "to_document",
    "example_config",
    "analyze",
    "simulate",
    "write_csv",
    "CSV_COLUMNS",
]

UNITS = {"library": 1.0, "vacuum-half": 2.0}
P11_INDICES = [(i, j) for i in range(4) for j in range(i, 4)]
CSV_COLUMNS = ["t", "E_N", "sep_min_eig", "heisenberg_min_eig"] + [
    f"P11_{i}{j}" for i, j in P11_INDICES
]


class ConfigError(ValueError):
    """A scenario document does not describe a valid run."""


class NotHurwitzError(RuntimeError):
    def __init__(self, abscissa):
        super().__init__(f"closed loop is not Hurwitz (spectral abscissa {abscissa:.6g})")
        self.abscissa = abscissa


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    plants: tuple
    fields: tuple
    controller: ControllerSpec
    wiring: WiringSpec
    initial_P11: np.ndarray
    initial_classical: np.ndarray = None
    units: str = "library"
    t_end: float = None
    steps: int = 2000
    tolerances: dict = field(default_factory=dict)
    output: str = "run"

    @property
    def verdict_tol(self):
        return self.tolerances.get("verdict", LMI_TOL)

    def closed_loop(self):
        G = [to_quadrature(p, f) for p, f in zip(self.plants, self.fields)]
        return compose_closed_loop(G[0], G[1], self.controller, self.wiring)

    def initial_covariance(self):
        """Full initial covariance in library units, controller block included."""
        n_c = self.controller.n_c
        P0 = np.zeros((4 + n_c, 4 + n_c))
        P0[:4, :4] = UNITS[self.units] * self.initial_P11
        if self.initial_classical is not None:
            P0[4:, 4:] = self.initial_classical
        return P0

    def time_grid(self, A):
        return default_time_grid(A, self.steps, self.t_end)


def _complex(a, path):
    arr = np.asarray(a, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ConfigError(f"{path}: complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _real(a, path, shape=None):
    try:
        arr = np.asarray(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a numeric array") from exc
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{path}: expected shape {shape}, got {arr.shape}")
    return arr


def _get(table, key, path):
    try:
        return table[key]
    except (KeyError, TypeError):
        raise ConfigError(f"{path}: missing required key '{key}'") from None


def parse_config(doc):
    """Build a :class:`ScenarioConfig` from a parsed TOML mapping."""
    plants_doc = _get(doc, "plants", "scenario")
    if len(plants_doc) != 2:
        raise ConfigError(f"plants: exactly two plants are required, got {len(plants_doc)}")
    ctrl_doc = _get(doc, "controller", "scenario")
    plants, fields = [], []
    measure, modulate, M, C_ham, C_mod = [], [], [], [], []
    for k, p in enumerate(plants_doc):
        path = f"plants[{k}]"
        try:
            spec = OscillatorSpec(
                _real(_get(p, "R", path), f"{path}.R"),
                _complex(_get(p, "K", path), f"{path}.K"),
                _complex(_get(p, "S", path), f"{path}.S"),
            )
            fdoc = p.get("field", "vacuum")
            fld = vacuum_field(spec.m) if fdoc == "vacuum" else ItoFieldSpec(
                _real(fdoc, f"{path}.field"), 1j * commutation_matrix(spec.m)
            )
        except ConstructionError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        plants.append(spec)
        fields.append(fld)
        measure.append(tuple(p.get("measure", ())))
        modulate.append(tuple(p.get("modulate", ())))
        M.append(_real(p["M"], f"{path}.M", (2, 2)) if "M" in p else None)
        C_ham.append(_real(p["C_ham"], f"{path}.C_ham") if "C_ham" in p else None)
        C_mod.append(_real(p["C_mod"], f"{path}.C_mod") if "C_mod" in p else None)
    try:
        wiring = WiringSpec(tuple(measure), tuple(modulate), tuple(M))
        ctrl = ControllerSpec(
            _real(_get(ctrl_doc, "A_c", "controller"), "controller.A_c"),
            _real(_get(ctrl_doc, "B_c", "controller"), "controller.B_c"),
            tuple(C_ham),
            tuple(C_mod),
        )
    except ConstructionError as exc:
        raise ConfigError(f"controller/wiring: {exc}") from exc

    init = _get(doc, "initial", "scenario")
    units = init.get("units", "library")
    if units not in UNITS:
        raise ConfigError(f"initial.units: expected one of {sorted(UNITS)}, got {units!r}")
    P11 = _real(_get(init, "P11", "initial"), "initial.P11", (4, 4))
    classical = None
    if "classical" in init:
        classical = _real(init["classical"], "initial.classical", (ctrl.n_c, ctrl.n_c))

    grid = doc.get("time_grid", {})
    t_end = grid.get("t_end")
    steps = grid.get("steps", 2000)
    if t_end is not None and t_end < 0:
        raise ConfigError("time_grid.t_end: must be >= 0")
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("time_grid.steps: must be a positive integer")
    return ScenarioConfig(
        tuple(plants), tuple(fields), ctrl, wiring, P11, classical, units,
        None if t_end is None else float(t_end), steps,
        dict(doc.get("tolerances", {})), doc.get("output", {}).get("prefix", "run"),
    )


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)


def _pairs(z):
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def to_document(cfg):
    """Mapping that :func:`parse_config` turns back into ``cfg``."""
    plants = []
    for k, (p, f) in enumerate(zip(cfg.plants, cfg.fields)):
        entry = {"R": p.R.tolist(), "K": _pairs(p.K), "S": _pairs(p.S)}
        entry["field"] = "vacuum" if np.array_equal(f.S_w, np.eye(2 * f.m)) else f.S_w.tolist()
        entry["measure"] = list(cfg.wiring.measure[k])
        entry["modulate"] = list(cfg.wiring.modulate[k])
        if cfg.wiring.M[k] is not None:
            entry["M"] = cfg.wiring.M[k].tolist()
        if cfg.controller.C_ham[k] is not None:
            entry["C_ham"] = cfg.controller.C_ham[k].tolist()
        if cfg.controller.C_mod[k] is not None:
            entry["C_mod"] = cfg.controller.C_mod[k].tolist()
        plants.append(entry)
    doc = {
        "plants": plants,
        "controller": {"A_c": cfg.controller.A_c.tolist(), "B_c": cfg.controller.B_c.tolist()},
        "initial": {"units": cfg.units, "P11": cfg.initial_P11.tolist()},
        "time_grid": {"steps": cfg.steps},
        "output": {"prefix": cfg.output},
    }
    if cfg.initial_classical is not None:
        doc["initial"]["classical"] = cfg.initial_classical.tolist()
    if cfg.t_end is not None:
        doc["time_grid"]["t_end"] = cfg.t_end
    if cfg.tolerances:
        doc["tolerances"] = dict(cfg.tolerances)
    return doc


def dump_config(cfg):
    return tomli_w.dumps(to_document(cfg))


def example_config(initial="entangled"):
    """The two-cavity feedback example as a scenario."""
    P11 = {
        "entangled": example.ENTANGLED_P0_PRINTED,
        "separable": example.SEPARABLE_P0_PRINTED,
    }[initial]
    cav = example.cavity_spec()
    return ScenarioConfig(
        (cav, cav),
        (vacuum_field(1), vacuum_field(1)),
        example.controller(),
        example.wiring(),
        np.array(P11),
        np.zeros((1, 1)),
        "vacuum-half",
        output=f"example1_{initial}",
    )


def analyze(cfg):
    """Steady-state analysis; raises :class:`NotHurwitzError` for unstable loops."""
    cl = cfg.closed_loop()
    stable, alpha = is_hurwitz(cl.A)
    if not stable:
        raise NotHurwitzError(alpha)
    P = solve_steady_state(cl.A, cl.noise_covariance)
    rep = log_negativity(P[:4, :4], tol=cfg.verdict_tol)
    return {
        "abscissa": alpha,
        "steady_state_P": P.tolist(),
        "sep_min_eig": rep.sep_min_eig,
        "E_N": rep.E_N,
        "nu": rep.nu,
        "heisenberg_min_eig": min_eig_hermitian(P, cl.theta),
        "verdict": rep.verdict,
    }


def _row(t, P, theta, tol):
    rep = log_negativity(P[:4, :4], tol=tol)
    return [t, rep.E_N, rep.sep_min_eig, min_eig_hermitian(P, theta)] + [
        P[i, j] for i, j in P11_INDICES
    ]


def simulate(cfg):
    """Transient run. Returns ``(trajectory, rows, summary)``.

    Raises :class:`InvalidCovarianceError` if the initial covariance violates
    the uncertainty relation.
    """
    cl = cfg.closed_loop()
    P0 = cfg.initial_covariance()
    lam = min_eig_hermitian(P0, cl.theta)
    if lam < -1e-8:
        raise InvalidCovarianceError(
            f"initial covariance violates P + i Theta >= 0 (min eigenvalue {lam:.3e})"
        )
    times = cfg.time_grid(cl.A)
    traj = propagate(cl.A, cl.noise_covariance, P0, times, cl.partition)
    rows = [_row(t, P, cl.theta, cfg.verdict_tol) for t, P in zip(traj.times, traj.P)]
    E_N = np.array([r[1] for r in rows])
    summary = {
        "steps": len(rows) - 1,
        "t_end": float(times[-1]),
        "E_N_initial": rows[0][1],
        "E_N_final": rows[-1][1],
        "E_N_max": float(E_N.max()),
        "min_sep_min_eig": float(min(r[2] for r in rows)),
        "min_heisenberg_min_eig": float(min(r[3] for r in rows)),
        "sudden_death_time": sudden_death_time(traj, cfg.verdict_tol),
        "final_verdict": "separable" if rows[-1][2] >= -cfg.verdict_tol else "entangled",
    }
    return traj, rows, summary


def _fmt(x):
    x = float(x)
    return repr(x) if math.isfinite(x) else str(x)


def write_csv(rows, fh=None):
    """Write rows under :data:`CSV_COLUMNS` using shortest round-trip floats.

    Returns the text when ``fh`` is ``None``.
    """
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    if fh is None:
        return buf.getvalue()

