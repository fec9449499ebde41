"""The ten release criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import csv
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import random_density, random_kraus_pair
from oqwalk.channel import (
    BoundaryCondition,
    LatticeState,
    NearestNeighborRule,
    block_power_entry,
    build_channel,
    channel_for_query,
    monte_carlo_hitting,
    step,
    transition_probability,
)
from oqwalk.errors import InapplicableRouteError, NotAbsorbingError
from oqwalk.firstvisit import (
    absorption_functionals,
    absorption_stats,
    build_segment,
    degenerate_rotation,
    resolvent_apply,
    rotation_closed_form,
    rotation_rule,
)
from oqwalk.latticegf import (
    boundary_gf,
    fibonacci_poly,
    fibonacci_product,
    hadamard_closed_form,
    hadamard_closed_form_affine,
    hadamard_ruin_affine,
    series_coeffs,
)
from oqwalk.linalg import DensityMatrix, conj_rep, unvec, vec
from oqwalk.measure import DETTE_SINGULAR_MSG, duran_measure, km_model
from oqwalk.paths import (
    block_power_zero_loop,
    catalan,
    catalan_double_sum,
    catalan_double_sum_block,
    count_paths,
    count_paths_dp,
    path_count_propagator,
)
from oqwalk.drift import DensityGrid, orbit_drift_profile, one_step_drift, pakes_check, CERTIFIED
from oqwalk.walkspec import builtin_names, load_rule

GOLDEN = Path(__file__).parent / "golden" / "hadamard_tables.csv"
CONSTRUCTIVE = ["diag_equal", "diag_scalar", "diag_levels", "lazy_b03", "lazy_b06", "normal_pair"]
acceptance = pytest.mark.acceptance


def _table_rows():
    with open(GOLDEN) as fh:
        return [{k: (int(v) if k in ("M", "k") else Fraction(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


def _hadamard():
    r = load_rule("hadamard")
    return r.L, r.R


@acceptance(1, "ruin tables for M = 3..7 from three routes")
def test_ruin_tables():
    start = time.perf_counter()
    L, R = _hadamard()
    rows = _table_rows()
    assert len(rows) == sum(M - 1 for M in range(3, 8))
    segments = {M: build_segment(L, R, M) for M in range(3, 8)}
    for row in rows:
        M, k = row["M"], row["k"]
        want = (row["p_const"], row["p_coeff"], row["E_const"], row["E_coeff"])
        p, e, _ = hadamard_ruin_affine(k, M)
        assert (p.const, p.coeff, e.const, e.coeff) == want
        cp, ce = hadamard_closed_form_affine(k, M)
        assert (cp.const, cp.coeff, ce.const, ce.coeff) == want
        f = absorption_functionals(segments[M], k)
        pc, ec = f.reach_coords(), f.time_coords()
        # affine in Re(rho12): equal diagonal weights and no Im(rho12) term
        for got, exact in [(pc["rho11"], want[0]), (pc["rho22"], want[0]), (pc["re12"], want[1]), (pc["im12"], 0),
                           (ec["rho11"], want[2]), (ec["rho22"], want[2]), (ec["re12"], want[3]), (ec["im12"], 0)]:
            assert abs(got - float(exact)) <= 1e-10, (M, k)
    assert time.perf_counter() - start < 10


@acceptance(2, "worked spectral-route probabilities")
def test_worked_spectral_probabilities(rng):
    start = time.perf_counter()
    expected = {"diag_equal": lambda r: 0.25, "diag_scalar": lambda r: 4 / 9,
                "diag_levels": lambda r: 4 / 9 * r[0, 0].real + 1 / 4 * r[1, 1].real}
    densities = [DensityMatrix.basis(2, 0), DensityMatrix.basis(2, 1)] + [random_density(rng, 2) for _ in range(3)]
    for name, formula in expected.items():
        rule = load_rule(name)
        model = km_model(rule)
        ch = channel_for_query(rule, 0, 2, 2)
        for rho in densities:
            km = model.probability(rho, 0, 2, 2)
            oracle = transition_probability(ch, rho, 0, 2, 2)
            assert abs(km - oracle) <= 1e-8, name
            assert abs(km - formula(rho.mat)) <= 1e-8, name
    assert time.perf_counter() - start < 5


@acceptance(3, "lazy-walk weight functions")
def test_lazy_weight_functions():
    for b in (0.3, 0.6):
        A = (1 - b * b) / 2 * np.eye(4)
        B = b * b * np.fliplr(np.eye(4))
        meas = duran_measure(A, B)
        lo, hi = meas.support()
        x = np.linspace(lo, hi, 102)[1:-1]
        # square roots of negative arguments vanish: each term lives on its own interval
        u = np.sqrt(np.clip((x - 1) * (-x + 2 * b * b - 1), 0, None))
        v = np.sqrt(np.clip((-x - 1) * (x + 2 * b * b - 1), 0, None))
        w1 = (u + v) / (np.pi * (b * b - 1) ** 2)
        w2 = (u - v) / (np.pi * (b * b - 1) ** 2)
        expected = np.zeros((x.size, 4, 4))
        for i in range(4):
            expected[:, i, i] = w1
            expected[:, i, 3 - i] = w2
        assert np.abs(meas.density(x) - expected).max() <= 1e-10


@acceptance(4, "path counts against enumeration")
def test_path_counts():
    A = conj_rep(load_rule("diag_levels").L)
    for i in range(9):
        for j in range(9):
            for n in range(21):
                c = count_paths(i, j, n)
                assert c == count_paths_dp(i, j, n)
                assert catalan_double_sum(i, j, n) == c
                assert np.array_equal(catalan_double_sum_block(A, i, j, n), block_power_zero_loop(A, i, j, n))
    for k in range(11):
        assert count_paths(0, 0, 2 * k) == catalan(k)


@acceptance(5, "generating-function goldens")
def test_generating_function_goldens(rng):
    assert series_coeffs(boundary_gf(1, 3), 19)[1::2] == [1, 2, 5, 14, 41, 122, 365, 1094, 3281, 9842]
    fib = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
    assert [fibonacci_poly(t)(1j) for t in range(11)] == fib
    for t in range(13):
        for z in rng.uniform(-1, 1, 10):
            assert abs(fibonacci_poly(t)(z) - fibonacci_product(t, z)) <= 1e-10


@acceptance(6, "rotation family against the resolvent")
def test_rotation_family(rng):
    densities = [DensityMatrix.basis(2, 0), DensityMatrix.from_bloch(1, 0, 0)] + [random_density(rng, 2) for _ in range(4)]
    for t in (0.25, 0.5, np.sqrt(0.5), 0.9):
        s = np.sqrt(1 - t * t)
        for M in (3, 4, 5):
            seg = build_segment(*rotation_rule(t), M)
            for k in range(1, M):
                for rho in densities:
                    res = absorption_stats(seg, rho, k)
                    cf = rotation_closed_form(t, M, k, rho)
                    assert abs(res.p_reach - cf.p_reach) <= 1e-9
                    assert abs(res.expected_time - cf.expected_time) <= 1e-9
                    if M == 3 and k == 1:
                        r11, x = rho.mat[0, 0].real, rho.re12
                        p = (t * t * (2 * r11 - 1) + 2 * t * s * x + 1 - r11) / (2 - t * t)
                        e = 2 * r11 + 2 * s * x / t + (1 - r11) / t**2
                        assert abs(res.p_reach - p) <= 1e-9 and abs(res.expected_time - e) <= 1e-9
    for rho in densities:
        r11 = float(rho.mat[0, 0].real)
        assert degenerate_rotation(0, 3, 1, rho).p_reach == 0
        assert degenerate_rotation(0, 3, 2, rho).p_reach == 1 - r11
        assert degenerate_rotation(0, 3, 1, rho).expected_time == degenerate_rotation(0, 3, 2, rho).expected_time == 1
        for k, e in [(1, 1 + r11), (2, 2 - r11)]:
            branch = degenerate_rotation(1, 3, k, rho)
            assert branch.p_reach == r11 and branch.expected_time == e
    # full reflection is absorbing and the resolvent agrees; no reflection never absorbs
    seg1 = build_segment(*rotation_rule(1.0), 3)
    for rho in densities:
        assert abs(absorption_stats(seg1, rho, 1).p_reach - rho.mat[0, 0].real) <= 1e-12
    with pytest.raises(NotAbsorbingError):
        absorption_stats(build_segment(*rotation_rule(0.0), 3), densities[0], 1)


@acceptance(7, "three-route triangle on constructive walks")
def test_three_route_triangle():
    constructive = []
    for name in builtin_names():
        try:
            km_model(load_rule(name))
        except InapplicableRouteError:
            continue
        constructive.append(name)
    assert sorted(constructive) == sorted(CONSTRUCTIVE)
    with pytest.raises(InapplicableRouteError, match=DETTE_SINGULAR_MSG):
        km_model(load_rule("hadamard"))
    worst = 0.0
    for name in constructive:
        rule = load_rule(name)
        model = km_model(rule)
        ch = build_channel(rule, 18)
        rng = np.random.default_rng(7)
        rhos = [vec(random_density(rng, rule.N).mat) for _ in range(3)]
        for i in range(7):
            for j in range(7):
                for n in range(11):
                    props = [block_power_entry(ch, i, j, n), model.propagator(i, j, n),
                             path_count_propagator(rule, i, j, n)]
                    for r in rhos:
                        ps = [np.trace(unvec(p @ r, rule.N)).real for p in props]
                        worst = max(worst, max(ps) - min(ps))
    assert worst < 1e-8, worst


@acceptance(8, "non-normal drift example")
def test_nonnormal_drift():
    rule = load_rule("nonnormal_drift")
    e11 = DensityMatrix.basis(2, 0)
    plus = DensityMatrix(np.full((2, 2), 0.5, dtype=complex))
    assert abs(one_step_drift(rule, e11, 1) + 1 / 3) <= 1e-12
    assert abs(one_step_drift(rule, plus, 1) + (2 * np.sqrt(6) + 1) / 6) <= 1e-12
    orbit = orbit_drift_profile(rule, e11, 50)
    assert np.abs(orbit[1].density.mat - plus.mat).max() <= 1e-12
    assert all(p.drift < -0.75 for p in orbit[1:])
    report = pakes_check(rule, range(0, 21), DensityGrid.reachable(rule, [e11], depth=50))
    assert report.verdict == CERTIFIED


@acceptance(9, "Monte Carlo against the closed forms")
def test_monte_carlo_consistency():
    start = time.perf_counter()
    L, R = _hadamard()
    rule = NearestNeighborRule(L, R, boundary=BoundaryCondition.segment(6))
    rho = DensityMatrix(np.full((2, 2), 0.5, dtype=complex))
    p, e = hadamard_closed_form(3, 6, rho)
    est = monte_carlo_hitting(rule, rho, 3, {0, 6}, trials=10**5, seed=2024)
    assert est.censored == 0
    p_hat, se = est.probability_of(6)
    assert abs(p_hat - p) <= 4 * se
    assert abs(est.mean_time - e) <= 4 * est.mean_time_stderr
    assert time.perf_counter() - start < 60


def _neumann(seg, z, v, terms=60):
    total, term = v.copy(), v.copy()
    for _ in range(terms):
        term = z * (seg.interior_step @ term)
        total = total + term
    return total


@acceptance(10, "property suites")
def test_property_suites():
    rng = np.random.default_rng(10)
    # trace conservation and positivity on reflecting walks
    for _ in range(20):
        L, R = random_kraus_pair(rng)
        ch = build_channel(NearestNeighborRule(L, R, boundary=BoundaryCondition.reflecting()), 14)
        state = LatticeState.localized(random_density(rng, 2), 0)
        for n in range(1, 13):
            state = step(ch, state)
            assert abs(state.total_trace - 1) <= n * 1e-12
            for m in state.entries.values():
                assert np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -1e-10
    # representation of conjugation and functoriality
    for _ in range(200):
        n = int(rng.integers(1, 5))
        b1, b2, x = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(3))
        b1, b2, x = (m / np.linalg.norm(m, 2) for m in (b1, b2, x))
        assert np.abs(unvec(conj_rep(b1) @ vec(x), n) - b1 @ x @ b1.conj().T).max() <= 1e-12
        assert np.abs(conj_rep(b1 @ b2) - conj_rep(b1) @ conj_rep(b2)).max() <= 1e-12
    # orthonormal matrix polynomials under every constructed measure
    for name in CONSTRUCTIVE:
        model = km_model(load_rule(name))
        meas, polys = model.measure, model.polys
        eye = np.eye(meas.order)
        for i in range(7):
            for j in range(i, 7):
                g = meas.integrate_sandwich(lambda xs, i=i: polys.evaluate(xs, i)[i],
                                            lambda xs, j=j: polys.evaluate(xs, j)[j])
                assert np.abs(g - (eye if i == j else 0)).max() <= 1e-8, (name, i, j)
    # resolvent against the truncated Neumann series
    L, R = _hadamard()
    for M in (3, 4):
        seg = build_segment(L, R, M)
        for k in range(1, M):
            v = seg.localized(random_density(rng, 2), k)
            assert np.abs(resolvent_apply(seg, 0.9, v) - _neumann(seg, 0.9, v)).max() <= 1e-9
    checked = 0
    while checked < 10:
        seg = build_segment(*random_kraus_pair(rng), int(rng.integers(3, 7)))
        if 0.9 * (1 - seg.spectral_margin) >= 0.65:
            continue
        v = seg.localized(random_density(rng, 2), 1)
        assert np.abs(resolvent_apply(seg, 0.9, v) - _neumann(seg, 0.9, v)).max() <= 1e-9
        checked += 1


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
