#!/usr/bin/env python3
"""Two Brownian motions on the 2-sphere that never change their distance.

The coupling drives the second motion with dW = J dB + K dC, where J
reflects the span of the current pair and scales the transverse directions;
the martingale part of the distance cancels exactly.  As an independent
cross-check we also carry both start points by a single Brownian rotation
(an isometry, so the distance is constant by construction) and compare the
marginal statistics of the two ensembles.

Run:  python demos/02_fixed_distance_sphere.py
"""

import numpy as np

from detcouple import canonical_start, constant, simulate_ensemble, sphere
from detcouple.verify import rotation_ensemble

print(__doc__)

spec = sphere(2)
rho0 = np.pi / 2
x0, y0 = canonical_start(spec, rho0)
dt, T, paths, seed = 1e-4, 1.0, 100, 42

print(f"simulating {paths} coupled pairs, dt = {dt:g}, T = {T:g} ...")
res = simulate_ensemble(spec, constant(rho0), x0, y0, dt, T, seed, paths)
print(f"  sup |d(X,Y) - pi/2| per path: mean {res.mean_sup_err:.4f}, "
      f"max {res.max_sup_err:.4f}")

enf = simulate_ensemble(spec, constant(rho0), x0, y0, dt, T, seed, paths,
                        enforce_distance=True)
print(f"  with exact re-projection onto the target distance: "
      f"max error {enf.max_sup_err:.2e}")

print("\nrotation-coupling oracle (same rotation applied to both points):")
_, sup, rotX, _ = rotation_ensemble(rho0, 1e-3, T, seed + 1, 2000)
print(f"  distance deviation over 2000 paths: {sup.max():.2e} (isometry, roundoff only)")

# Both ensembles are genuine sphere Brownian motions, so the mean of X(1)
# contracts to exp(-n/2) times the start point (n = 2 here).
coarse = simulate_ensemble(spec, constant(rho0), x0, y0, 1e-3, T, seed + 2, 2000)
m_sde = np.linalg.norm(coarse.final_X.mean(axis=0))
m_rot = np.linalg.norm(rotX.mean(axis=0))
print(f"\nmarginal mean decay at t = 1: |E X| = {m_sde:.4f} (coupled SDE), "
      f"{m_rot:.4f} (rotation), theory e^-1 = {np.exp(-1):.4f}")
