#!/usr/bin/env python3
"""Which distance profiles are realizable? A tour of the admissibility band.

A deterministic distance rho(t) between two coupled Brownian motions exists
exactly when rho'(t) stays inside a band [lo(rho), hi(rho)] whose shape is
set by the curvature:

    K > 0 (sphere):     lo < 0 < hi  -- distances may shrink, stay, or grow
    K = 0 (Euclidean):  lo = 0       -- distances can never shrink
    K < 0 (hyperbolic): lo > 0       -- distances are forced to grow

Run:  python demos/01_admissibility_bands.py
"""

import numpy as np

from detcouple import (check_admissibility, constant, euclidean, hyperbolic,
                       admissible_bounds, sphere, tabulated)

print(__doc__)

print(f"{'space':<12} {'rho':>5} {'lo(rho)':>10} {'hi(rho)':>10}")
for spec in (euclidean(3), sphere(3), hyperbolic(3)):
    for rho in (0.5, 1.0, 2.0):
        lo, hi = admissible_bounds(spec, rho)
        print(f"{spec.kind.value:<12} {rho:>5.2f} {lo:>10.4f} {hi:>10.4f}")
print()

# The sphere admits fixed-distance couplings (0 is inside the band) ...
rep = check_admissibility(sphere(2), constant(np.pi / 2), T=1.0)
print(f"constant pi/2 on the 2-sphere: admissible = {rep.admissible}")

# ... hyperbolic space does not: the band floor tanh(rho/2) is positive.
rep = check_admissibility(hyperbolic(2), constant(1.0), T=1.0)
print(f"constant 1.0 on the hyperbolic plane: admissible = {rep.admissible}")
print(f"  reason: {rep.reasons[0]}")

# Distances can never decrease on flat or negatively curved spaces.
ts = np.linspace(0.0, 1.0, 101)
rep = check_admissibility(euclidean(2), tabulated(ts, 2.0 - 0.5 * ts), grid=ts)
print(f"decreasing profile in the plane: admissible = {rep.admissible}")

# In dimension 1 the band collapses to {0}: only constant distances survive.
ramp = tabulated(ts, 1.0 + 0.2 * ts)
for spec in (euclidean(1), sphere(1), hyperbolic(1)):
    rep = check_admissibility(spec, ramp, grid=ts)
    print(f"growing profile, {spec.kind.value} line: admissible = {rep.admissible}")
