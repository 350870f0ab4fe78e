"""
Randomized search for entanglement generated by classical feedback
==================================================================

Draw random plants, wirings and controllers, and look for a loop whose
steady state, or whose trajectory from a separable start, is entangled.
None turns up. Flipping the sign of the noise drive makes the check
fail, which shows it is capable of failing.
"""

import numpy as np

from qlinctrl import log_negativity, propagate, solve_steady_state, verify_no_go
from qlinctrl.covariance import is_hurwitz
from qlinctrl.entanglement import random_closed_loop, random_separable_covariance

# One random loop, looked at by hand.
rng = np.random.default_rng(2024)
cl = random_closed_loop(rng, hurwitz=True)
print("partition (plant 1, plant 2, controller):", cl.partition)
print("spectral abscissa:", is_hurwitz(cl.A).abscissa)
P = solve_steady_state(cl.A, cl.noise_covariance)
print("steady-state two-mode report:", log_negativity(P[:4, :4]))

P0 = np.zeros_like(cl.A)
P0[:4, :4] = random_separable_covariance(7)
traj = propagate(cl.A, cl.noise_covariance, P0, np.linspace(0, 50, 201), cl.partition)
print("largest E_N along the trajectory:", max(log_negativity(Pt).E_N for Pt in traj.block(4)))

# Many loops at once.
report = verify_no_go(seed=42, trials=25)
print(report.summary())

# The same search with the noise drive negated.
broken = verify_no_go(seed=42, trials=5, fault="negate-noise")
print("with negated noise:", broken.summary())
