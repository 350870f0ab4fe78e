"""
A single cavity in quadrature form
==================================

Build the empty cavity used throughout the demos, look at its real
state-space matrices, and check the two physical constraints on them.
"""

import numpy as np

from qlinctrl import heisenberg_check, realizability_residual, solve_steady_state, to_quadrature, vacuum_field
from qlinctrl.example import cavity_spec

np.set_printoptions(precision=4, suppress=True)

# The cavity has no Hamiltonian (R = 0) and one mirror with coupling
# rate 0.01, so L = sqrt(0.01) a with a = (q + i p) / 2.
spec = cavity_spec()
print("K =", spec.K)

# Quadrature form: dx = A x dt + B dw, dy = C x dt + D dw.
cav = to_quadrature(spec, vacuum_field(1))
for name in "ABCD":
    print(f"{name} =\n{getattr(cav, name)}")

# Physical realizability: A Theta + Theta A^T - i B T_w B^T must vanish.
print("realizability residual:", realizability_residual(cav))

# The steady state of a damped cavity driven by vacuum is the vacuum
# itself, P = I, which sits exactly on the uncertainty boundary.
P = solve_steady_state(cav.A, cav.B @ cav.field.S_w @ cav.B.T)
print("steady-state covariance =\n", P)
print("uncertainty check:", heisenberg_check(P, cav.theta))

# Squeezing one quadrature below vacuum without stretching the other
# breaks the uncertainty relation.
print("squeezed-only check:", heisenberg_check(np.diag([0.5, 1.0]), cav.theta))
