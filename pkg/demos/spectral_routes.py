"""Three ways to get an n-step transition probability.

Block powers, the matrix-measure integral and closed-form path counts are
compared on every bundled walk; walks outside the constructive cases report
which hypothesis fails.
"""

import numpy as np

from oqwalk.channel import block_power_entry, build_channel
from oqwalk.errors import InapplicableRouteError
from oqwalk.measure import km_model
from oqwalk.paths import path_count_propagator
from oqwalk.walkspec import builtin_names, load_rule


def main():
    for name in builtin_names():
        rule = load_rule(name)
        try:
            model = km_model(rule)
        except InapplicableRouteError as exc:
            print(f"{name:16s} spectral route unavailable: {exc}")
            continue
        ch = build_channel(rule, 12)
        worst = 0.0
        for i, j, n in [(0, 2, 2), (1, 3, 4), (2, 2, 6), (0, 4, 6)]:
            a = block_power_entry(ch, i, j, n)
            b = model.propagator(i, j, n)
            c = path_count_propagator(rule, i, j, n)
            worst = max(worst, np.abs(a - b).max(), np.abs(a - c).max())
        print(f"{name:16s} case {model.case:8s} max propagator gap {worst:.1e}")


if __name__ == "__main__":
    main()
