"""Solve one Arrow-Debreu matching market with both solvers and compare the answers.

Run: python demos/quickstart.py
"""

import numpy as np

from nbmatch import (
    Kind,
    bvn_decompose,
    fw_solve,
    gen_random,
    kkt_residual,
    nash_objective,
    normalize,
    proportionality_check,
    solve_liad,
)
from nbmatch.instance import feasibility_gap

# Six agents, six goods, endowments worth half of what each agent could get.
inst, scaling = normalize(gen_random(6, Kind.ONE_SIDED_LINEAR, seed=2, endowment_delta=1.0))
delta, _ = feasibility_gap(inst)
print(f"kappa = {scaling.kappa:.3f}, feasibility gap delta = {delta:.3f}")

# Multiplicative weights: approximate allocation plus prices certifying it.
mwu = solve_liad(inst, eps=0.1)
print(f"\nMWU: {mwu.iterations} iterations, overload {mwu.overload:.2e}")
print("  CP_i - u_i (<= 0 certifies the averaged prices):", np.round(mwu.cp - mwu.utilities, 9))

# Frank-Wolfe on the smoothed objective: feasible at every step, certified by its gap.
x, rep = fw_solve(inst, eps=1e-6, step="line_search")
print(f"\nFW: {rep.iterations} iterations, gap {rep.gap:.1e}")
print("  utilities FW :", np.round(rep.utilities, 4))
print("  utilities MWU:", np.round(inst.agent_utilities(mwu.x), 4))
print(f"  Nash objective FW {nash_objective(x, inst):.5f} vs MWU {nash_objective(mwu.x, inst):.5f}")

cert = kkt_residual(x, None, inst)
print(f"  KKT with fitted prices: stationarity {cert.stationarity:.1e}, complementarity {cert.complementarity:.1e}")
prop = proportionality_check(x, inst, delta, scaling.kappa)
print(f"  smallest margin over the guaranteed share: {prop.min_margin:.4f}")

# A lottery over integral matchings with the same expected utilities.
dec = bvn_decompose(x)
print(f"\nLottery with {len(dec)} matchings; weights {np.round(dec.weights, 3)}")
print("  expected utilities:", np.round(dec.expected_utilities(inst.u), 4))
