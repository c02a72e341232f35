"""Empirical convergence of both solvers.

Frank-Wolfe with step 2/(t+1) needs O(1/eps) iterations, so shrinking eps
tenfold should multiply the count by roughly ten. MWU runs a fixed
O(n log n / eps^2) schedule and its potential stays inside the sandwich bound.

Run: python demos/rates.py
"""

import numpy as np

from nbmatch import fw_solve, gen_common_value, gen_random, normalize, solve_liad
from nbmatch.instance import Kind

print("Frank-Wolfe iterations on n=20 common-value markets")
print(f"{'seed':>4} {'eps=1e-2':>9} {'eps=1e-3':>9} {'eps=1e-4':>9}")
for seed in range(3):
    inst = gen_common_value(20, seed)
    counts = [fw_solve(inst, eps, record_trace=False)[1].iterations for eps in (1e-2, 1e-3, 1e-4)]
    print(f"{seed:>4} " + " ".join(f"{c:>9}" for c in counts))

print("\nMWU potential on an n=8 Arrow-Debreu market (eps=0.1)")
inst, _ = normalize(gen_random(8, Kind.ONE_SIDED_LINEAR, 0, endowment_delta=1.0))
res = solve_liad(inst, 0.1)
lower, log_phi, upper = res.trace.sandwich()
for t in np.linspace(0, len(log_phi) - 1, 6).astype(int):
    print(f"  t={t + 1:>6}: {lower[t]:9.3f} <= ln phi = {log_phi[t]:9.3f} <= {upper[t]:9.3f}")
print(f"final overload {res.overload:.3e}, max CP_i - u_i {np.max(res.cp - res.utilities):.2e}")
