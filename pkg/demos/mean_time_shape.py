"""Probe the shape of the mean absorption time for a few order-2 walks.

For each walk the coefficients of E_k in rho11, rho22 and Re(rho12) are fitted
from the exact resolvent, and three residuals are reported: the mirror of the
rho11 - rho22 gap under k -> M - k, the antisymmetry of the Re(rho12) term and
the size of the Im(rho12) term.  The symmetric shape holds for the Hadamard,
rotation and non-normal fair walks; a generic random Kraus pair breaks it.
Nothing is asserted; this is an experiment harness.
"""

import numpy as np

from oqwalk.firstvisit import mean_time_shape, rotation_rule
from oqwalk.walkspec import load_rule


def random_pair(rng):
    g = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    q, _ = np.linalg.qr(g)
    return q[:2], q[2:]


def main():
    rng = np.random.default_rng(0)
    walks = {"hadamard": (load_rule("hadamard").L, load_rule("hadamard").R),
             "nonnormal_fair": (load_rule("nonnormal_fair").L, load_rule("nonnormal_fair").R),
             "rotation t=0.4": rotation_rule(0.4),
             "random pair": random_pair(rng)}
    print(f"{'walk':16s} {'M':>2s}  {'mirror':>9s}  {'antisym':>9s}  {'imag':>9s}  holds")
    for name, (L, R) in walks.items():
        for M in (4, 5, 6):
            s = mean_time_shape(L, R, M)
            print(f"{name:16s} {M:2d}  {s.mirror_residual:9.1e}  {s.antisymmetry_residual:9.1e}  "
                  f"{s.imaginary_residual:9.1e}  {s.holds}")


if __name__ == "__main__":
    main()
