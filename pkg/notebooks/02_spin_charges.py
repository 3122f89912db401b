"""
Point charges with spin
=======================

Two static charges on the circle turn the Sutherland model into a spin
Calogero model: the charge matrices rotate while the particles move.  Only
gauge-invariant combinations of the spins are physical.
"""

# %%
import numpy as np

from cmgauge import DeltaSites, IntegratorSettings, SystemConfig, integrate, solve
from cmgauge.verify import compare_trajectories, gauge_invariants

rng = np.random.default_rng(1)
rho = 0.3 * (rng.normal(size=(2, 3, 3)) + 1j * rng.normal(size=(2, 3, 3)))
rho[1] -= np.diag(np.einsum("jaa->a", rho))  # diagonal charges balance over the sites
cfg = SystemConfig(DeltaSites((-1.0, 1.5), rho), 0.35, [-0.8, 0.2, 1.1], [0.1, 0.0, -0.1])

times = np.linspace(0.0, 3.0, 7)
ex = solve(cfg, times)
orc = integrate(cfg, IntegratorSettings("DOP853", rtol=1e-12, atol=1e-14), times)

# %%
# The data are complex, so the positions leave the real line.
for t, q in zip(ex.t, ex.q):
    print(f"t={t:3.1f}", np.round(q, 5))

# %%
# Diagonals, two-cycle products and trace powers of the spins are unchanged by
# the residual diagonal gauge freedom, so they are what we compare.
inv = gauge_invariants(ex.spins)
print("tr rho_1^2 along the run:", np.round(inv["traces"][:, 1], 10))
rep = compare_trajectories(cfg, ex, orc)
print(rep.line())
