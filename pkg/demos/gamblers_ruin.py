"""Gambler's ruin for the Hadamard split and the rotation family.

Prints the affine reach/time coefficients from the exact generating-function
route next to the resolvent route, then sweeps the rotation angle.
"""

import numpy as np

from oqwalk.firstvisit import absorption_functionals, absorption_stats, build_segment, rotation_closed_form, rotation_rule
from oqwalk.latticegf import hadamard_ruin_affine
from oqwalk.linalg import DensityMatrix
from oqwalk.walkspec import load_rule


def hadamard_tables():
    rule = load_rule("hadamard")
    print("M k   p (exact)                 E (exact)                max resolvent gap")
    for M in range(3, 8):
        seg = build_segment(rule.L, rule.R, M)
        for k in range(1, M):
            p, e, _ = hadamard_ruin_affine(k, M)
            f = absorption_functionals(seg, k)
            pc, ec = f.reach_coords(), f.time_coords()
            gap = max(abs(pc["rho11"] - float(p.const)), abs(pc["re12"] - float(p.coeff)),
                      abs(ec["rho11"] - float(e.const)), abs(ec["re12"] - float(e.coeff)))
            print(f"{M} {k}   {str(p):24s}  {str(e):24s} {gap:.1e}")


def rotation_sweep():
    rho = DensityMatrix.from_bloch(0.6, 0.0, 0.8)
    print("\nrotation family, M = 5, k = 2, rho with Bloch vector (0.6, 0, 0.8)")
    print("  t      p        E        closed-form gap")
    for t in np.linspace(0.1, 0.95, 8):
        res = absorption_stats(build_segment(*rotation_rule(t), 5), rho, 2)
        cf = rotation_closed_form(t, 5, 2, rho)
        gap = max(abs(res.p_reach - cf.p_reach), abs(res.expected_time - cf.expected_time))
        print(f"  {t:.3f}  {res.p_reach:.5f}  {res.expected_time:8.3f}  {gap:.1e}")


if __name__ == "__main__":
    hadamard_tables()
    rotation_sweep()
