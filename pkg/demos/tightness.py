"""The non-bipartite share bound is tight up to a constant.

In the family built by gen_tightness(l), the last agent likes only the l middle
agents, while l other agents compete for it. At the optimum it keeps 1/(l+1)
units, so its utility is a 1/(l(l+1)) fraction of its equal-share utility.

Run: python demos/tightness.py
"""

from nbmatch import fw_solve, gen_tightness, proportionality_check

print(f"{'l':>3} {'n':>4} {'u_last':>10} {'1/(l+1)':>10} {'sum_u/u_last':>13} {'margin':>10} {'iters':>6}")
for ell in (1, 2, 3, 5, 8, 12):
    inst = gen_tightness(ell)
    x, rep = fw_solve(inst, 1e-8, step="line_search")
    u_last = rep.utilities[-1]
    margin = proportionality_check(x, inst).margins[-1]
    print(
        f"{ell:>3} {inst.n:>4} {u_last:>10.6f} {1 / (ell + 1):>10.6f} "
        f"{inst.u[-1].sum() / u_last:>13.3f} {margin:>10.6f} {rep.iterations:>6}"
    )
print("\nl = 1 is the exception: its single middle agent also competes for the last agent, which gets 2/3.")
