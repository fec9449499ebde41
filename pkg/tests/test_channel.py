import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_kraus_pair
from oqwalk.channel import (
    SINK,
    BoundaryCondition,
    LatticeState,
    NearestNeighborRule,
    NormalizationError,
    TruncationError,
    block_power_entry,
    build_channel,
    channel_for_query,
    evolve,
    monte_carlo_hitting,
    sample_trajectory,
    step,
    transition_probability,
)
from oqwalk.linalg import DensityMatrix, allclose, conj_rep, vec, unvec

seeds = st.integers(0, 2**32 - 1)
HALF = np.eye(2) / np.sqrt(2)


def _reflecting(L, R):
    return NearestNeighborRule(L, R, boundary=BoundaryCondition.reflecting())


class TestRule:
    def test_rejects_unnormalized(self):
        with pytest.raises(NormalizationError):
            NearestNeighborRule(np.eye(2), np.eye(2))

    def test_rejects_mismatched_orders(self):
        with pytest.raises(ValueError):
            NearestNeighborRule(np.eye(2), np.eye(3))

    def test_absorbing_site_zero_sinks_left_move(self):
        trans = NearestNeighborRule(HALF, HALF).transitions(0)
        assert set(trans) == {1, SINK}

    def test_reflecting_with_loops_needs_explicit_matrices(self):
        a = np.eye(2) / np.sqrt(3)
        with pytest.raises(NormalizationError):
            NearestNeighborRule(a, a, a, BoundaryCondition.reflecting())

    def test_segment_ends_are_traps(self):
        rule = NearestNeighborRule(HALF, HALF, boundary=BoundaryCondition.segment(4))
        assert allclose(rule.transitions(4)[4], np.eye(2), 0)
        with pytest.raises(ValueError):
            rule.transitions(5)

    def test_override_normalization_checked(self):
        with pytest.raises(NormalizationError):
            NearestNeighborRule(HALF, HALF, overrides={2: (np.eye(2), None, np.eye(2))})


class TestBuildChannel:
    def test_scalar_split_blocks(self):
        ch = build_channel(NearestNeighborRule(HALF, HALF), 4)
        assert allclose(ch.block(1, 2), np.eye(4) / 2, 1e-15)
        assert allclose(ch.block(1, 0), np.eye(4) / 2, 1e-15)
        assert allclose(ch.block(0, 0), np.zeros((4, 4)), 0)

    def test_segment_site_count(self):
        rule = NearestNeighborRule(HALF, HALF, boundary=BoundaryCondition.segment(3))
        assert build_channel(rule).sites == 4
        with pytest.raises(ValueError):
            build_channel(rule, 10)

    def test_query_truncation(self):
        ch = channel_for_query(NearestNeighborRule(HALF, HALF), 1, 3, 5)
        assert ch.sites == 9

    def test_too_small_truncation(self):
        ch = build_channel(NearestNeighborRule(HALF, HALF), 3)
        with pytest.raises(TruncationError):
            block_power_entry(ch, 0, 2, 4)


class TestEvolution:
    def test_step_counts_absorbed_mass(self):
        ch = build_channel(NearestNeighborRule(HALF, HALF), 4)
        out = step(ch, LatticeState.localized(DensityMatrix.basis(2, 0), 0))
        assert out.absorbed == pytest.approx(0.5)
        assert out.site_probability(1) == pytest.approx(0.5)

    def test_step_refuses_leaving_truncation(self):
        ch = build_channel(NearestNeighborRule(HALF, HALF), 3)
        with pytest.raises(TruncationError):
            step(ch, LatticeState.localized(DensityMatrix.basis(2, 0), 2))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 12))
    def test_trace_conservation_reflecting(self, seed, n):
        rng = np.random.default_rng(seed)
        L, R = random_kraus_pair(rng)
        ch = build_channel(_reflecting(L, R), n + 2)
        state = LatticeState.localized(random_density(rng, 2), 0)
        for k in range(1, n + 1):
            state = step(ch, state)
            assert abs(state.total_trace - 1) <= k * 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 12))
    def test_positivity_and_site_diagonal(self, seed, n):
        rng = np.random.default_rng(seed)
        L, R = random_kraus_pair(rng)
        ch = build_channel(NearestNeighborRule(L, R), n + 4)
        state = LatticeState.localized(random_density(rng, 2), 2)
        for _ in range(n):
            state = step(ch, state)
            assert all(isinstance(s, int) and m.shape == (2, 2) for s, m in state.entries.items())
            for m in state.entries.values():
                assert np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -1e-10
            assert state.total_trace + state.absorbed == pytest.approx(1, abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(0, 3), st.integers(0, 3), st.integers(0, 6))
    def test_block_power_matches_evolution(self, seed, i, j, n):
        rng = np.random.default_rng(seed)
        L, R = random_kraus_pair(rng)
        rule = NearestNeighborRule(L, R)
        ch = channel_for_query(rule, i, j, n)
        rho = random_density(rng, 2)
        state = evolve(ch, LatticeState.localized(rho, i), n)
        assert transition_probability(ch, rho, i, j, n) == pytest.approx(state.site_probability(j), abs=1e-12)
        got = unvec(block_power_entry(ch, i, j, n) @ vec(rho.mat), 2)
        assert allclose(got, state.entries.get(j, np.zeros((2, 2))), 1e-12)

    def test_two_step_scalar_walk(self):
        rule = NearestNeighborRule(HALF, HALF)
        p = transition_probability(channel_for_query(rule, 0, 2, 2), DensityMatrix.basis(2, 0), 0, 2, 2)
        assert p == pytest.approx(0.25, abs=1e-15)

    def test_probability_bounds(self, rng):
        L, R = random_kraus_pair(rng)
        rule = NearestNeighborRule(L, R)
        for n in range(6):
            p = transition_probability(channel_for_query(rule, 1, 1, n), random_density(rng, 2), 1, 1, n)
            assert -1e-12 <= p <= 1 + 1e-10


class TestTrajectories:
    def test_sample_trajectory_reproducible(self):
        rule = NearestNeighborRule(HALF, HALF)
        a = sample_trajectory(rule, DensityMatrix.basis(2, 0), 3, 20, seed=7)
        b = sample_trajectory(rule, DensityMatrix.basis(2, 0), 3, 20, seed=7)
        assert [s for s, _ in a] == [s for s, _ in b]

    def test_trajectory_moves_by_one(self):
        rule = NearestNeighborRule(HALF, HALF, boundary=BoundaryCondition.reflecting())
        path = sample_trajectory(rule, DensityMatrix.basis(2, 0), 0, 30, seed=1)
        sites = [s for s, _ in path]
        assert all(abs(a - b) <= 1 for a, b in zip(sites, sites[1:]))

    def test_deterministic_right_walk(self):
        rule = NearestNeighborRule(np.zeros((2, 2)), np.eye(2))
        est = monte_carlo_hitting(rule, DensityMatrix.basis(2, 0), 2, {7}, trials=100, seed=0)
        assert est.estimate == 1.0
        assert est.mean_time == 5.0

    def test_start_in_target(self):
        rule = NearestNeighborRule(HALF, HALF)
        est = monte_carlo_hitting(rule, DensityMatrix.basis(2, 0), 3, {3, 8}, trials=10, seed=0)
        assert est.estimate == 1.0 and est.mean_time == 0.0

    def test_censoring_reported(self):
        rule = NearestNeighborRule(HALF, HALF, boundary=BoundaryCondition.reflecting())
        est = monte_carlo_hitting(rule, DensityMatrix.basis(2, 0), 0, {50}, trials=200, seed=0, step_cap=20)
        assert est.censored == 200 and est.estimate == 0.0

    def test_seeded_reproducibility(self):
        rule = NearestNeighborRule(HALF, HALF, boundary=BoundaryCondition.segment(5))
        a = monte_carlo_hitting(rule, DensityMatrix.basis(2, 0), 2, {0, 5}, trials=500, seed=3)
        b = monte_carlo_hitting(rule, DensityMatrix.basis(2, 0), 2, {0, 5}, trials=500, seed=3)
        assert a == b

    def test_sampling_matches_transition_probability(self):
        rng = np.random.default_rng(11)
        trials = 800
        for r in range(20):
            L, R = random_kraus_pair(rng)
            rule = NearestNeighborRule(L, R)
            rho = random_density(rng, 2)
            n = int(rng.integers(1, 9))
            i = int(rng.integers(0, 3))
            j = int(rng.integers(max(0, i - n), i + n + 1))
            exact = transition_probability(channel_for_query(rule, i, j, n), rho, i, j, n)
            hits = 0
            for t in range(trials):
                path = sample_trajectory(rule, rho, i, n, seed=(r, t))
                hits += len(path) == n + 1 and path[-1][0] == j
            freq = hits / trials
            se = np.sqrt(max(exact * (1 - exact), 1e-12) / trials)
            assert abs(freq - exact) <= 4 * se, (r, freq, exact)
