"""Two identical cavities linked by a first-order classical controller.

The amplitude quadrature of cavity 1's output is homodyned and drives a
scalar controller ``dz = -z dt + dm``; its output ``(z, z)`` displaces the
input field of cavity 2. Each cavity has a mirror coupling rate of 0.01.

State ordering follows the composition: plant slot 1 is cavity 2 and slot
2 is cavity 1, so ``x = (q2, p2, q1, p1, z)`` and the noise vector is
``(w_31, w_32, w_11, w_12)``, where field 3 is the modulator's input.

The two reference initial covariances are written with vacuum variance
1/2 and must be doubled before use; :data:`ENTANGLED_P0` and
:data:`SEPARABLE_P0` are already in library units.
"""

import numpy as np

from .interconnect import ControllerSpec, WiringSpec, compose_closed_loop
from .model import OscillatorSpec, to_quadrature, vacuum_field

COUPLING = 0.01

ENTANGLED_P0_PRINTED = np.array([
    [0.5028, 0, -0.0528, 0],
    [0, 0.5028, 0, 0.0528],
    [-0.0528, 0, 0.5028, 0],
    [0, 0.0528, 0, 0.5028],
])
SEPARABLE_P0_PRINTED = np.array([
    [0.5704, 0, 0.0034, 0.0562],
    [0, 0.5704, 0, 0.0528],
    [0.0034, 0, 0.6203, 0.0499],
    [0.0562, 0.0528, 0.0499, 0.6203],
])

# controller constants: dz = A z dt + B dm, u = (C1, C2)^T z
CTRL_A, CTRL_B, CTRL_C1, CTRL_C2 = -1.0, 1.0, 1.0, 1.0

PRINTED_A = np.array([
    [-0.005, 0, 0, 0, -0.1 * CTRL_C1],
    [0, -0.005, 0, 0, -0.1 * CTRL_C2],
    [0, 0, -0.005, 0, 0],
    [0, 0, 0, -0.005, 0],
    [0, 0, 0.1 * CTRL_B, 0, CTRL_A],
])
PRINTED_B = np.array([
    [-0.1, 0, 0, 0],
    [0, -0.1, 0, 0],
    [0, 0, -0.1, 0],
    [0, 0, 0, -0.1],
    [0, 0, CTRL_B, 0],
])

for _a in (ENTANGLED_P0_PRINTED, SEPARABLE_P0_PRINTED, PRINTED_A, PRINTED_B):
    _a.setflags(write=False)


def from_unit_commutator(P):
    """Rescale a covariance written with vacuum variance 1/2 to library units."""
    return 2.0 * np.asarray(P, dtype=float)


ENTANGLED_P0 = from_unit_commutator(ENTANGLED_P0_PRINTED)
SEPARABLE_P0 = from_unit_commutator(SEPARABLE_P0_PRINTED)
ENTANGLED_P0.setflags(write=False)
SEPARABLE_P0.setflags(write=False)


def cavity_spec(coupling=COUPLING):
    """Empty resonant cavity: ``R = 0`` and ``L = sqrt(coupling) a``."""
    # a = (q + i p) / 2 when [q, p] = 2i
    K = np.sqrt(coupling) / 2 * np.array([[1.0, 1.0j]])
    return OscillatorSpec(np.zeros((2, 2)), K, np.eye(1))


def cavity(coupling=COUPLING):
    return to_quadrature(cavity_spec(coupling), vacuum_field(1))


def controller():
    return ControllerSpec(
        [[CTRL_A]], [[CTRL_B]],
        C_ham=(None, None),
        C_mod=([[CTRL_C1], [CTRL_C2]], None),
    )


def wiring():
    # slot 2 (cavity 1): amplitude quadrature measured; slot 1 (cavity 2): field displaced
    return WiringSpec(measure=((), (0,)), modulate=((0,), ()))


def closed_loop():
    return compose_closed_loop(cavity(), cavity(), controller(), wiring())


def max_ulp_distance(a, b):
    """Largest elementwise distance between ``a`` and ``b`` in units in the last place."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.spacing(np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


def matches_printed(cl, maxulp=2):
    """Whether the composed loop reproduces the reference drift and noise matrices.

    The printed decimals (e.g. ``-0.005``) are not binary fractions, so
    agreement is to rounding: zero blocks exactly, other entries within
    ``maxulp`` units in the last place.
    """
    return (
        cl.A.shape == PRINTED_A.shape
        and cl.B.shape == PRINTED_B.shape
        and max_ulp_distance(cl.A, PRINTED_A) <= maxulp
        and max_ulp_distance(cl.B, PRINTED_B) <= maxulp
    )


def initial_covariance(P11, n_c=1, z_variance=0.0):
    """Embed a two-mode covariance with an uncorrelated controller state."""
    P0 = np.zeros((4 + n_c, 4 + n_c))
    P0[:4, :4] = P11
    P0[4:, 4:] = z_variance * np.eye(n_c)
    return P0
