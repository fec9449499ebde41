"""Drift checks on a non-normal walk whose verdict depends on the density set.

Over all densities the one-step drift reaches +2/3, but the densities the walk
can actually produce from the first basis state all drift downward.
"""

import numpy as np

from oqwalk.drift import DensityGrid, drift_operator, linear_h, orbit_drift_profile, pakes_check
from oqwalk.linalg import DensityMatrix
from oqwalk.walkspec import load_rule


def main():
    rule = load_rule("nonnormal_drift")
    w = drift_operator(rule, 1, linear_h)
    print("largest drift over all densities:", np.linalg.eigvalsh(w)[-1])

    full = pakes_check(rule, range(21), DensityGrid.bloch(500))
    print(f"Bloch grid:     {full.verdict:12s} sup {full.sup_drift:+.4f}  ({full.scope})")

    grid = DensityGrid.reachable(rule, [DensityMatrix.basis(2, 0)], depth=50)
    reach = pakes_check(rule, range(21), grid)
    print(f"reachable set:  {reach.verdict:12s} sup {reach.sup_drift:+.4f}  ({reach.scope})")

    orbit = orbit_drift_profile(rule, DensityMatrix.basis(2, 0), 10)
    print("\nleft-move orbit from the first basis state")
    for p in orbit:
        print(f"  step {p.step:2d}  drift {p.drift:+.6f}")


if __name__ == "__main__":
    main()
