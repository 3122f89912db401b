"""
Hyperbolic scattering and the trig dual
=======================================

With the 1/sinh^2 potential the particles repel and fly apart.  The monodromy
eigenvalues e^{2 pi g q} then spread exponentially, which the solver handles
with a graded Jacobi diagonalization.  Asymptotically the momenta become a
permutation of free momenta with the same total energy.
"""

# %%
import numpy as np

from cmgauge import SutherlandHyp, SystemConfig, hamiltonian, solve
from cmgauge.models import initial_state
from cmgauge.verify import check_duality

cfg = SystemConfig(SutherlandHyp(1.0), 0.5, [-0.4, 0.1, 0.5], [0.3, 0.0, -0.3])
H = hamiltonian(initial_state(cfg), cfg).real
tr = solve(cfg, [0.0, 5.0, 20.0, 60.0])
for t, q, p in zip(tr.t, tr.q.real, tr.p.real):
    print(f"t={t:5.1f}  q={np.round(q, 3)}  p={np.round(p, 6)}")
print("energy", H, "kinetic at the end", 0.5 * np.sum(tr.p[-1].real ** 2))

# %%
# Multiplying positions and momenta by i maps the hyperbolic model onto the
# trigonometric one with imaginary data; both solvers must agree.
print(check_duality(cfg, T=1.0).line())
