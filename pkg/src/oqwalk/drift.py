"""Lyapunov drift checks for positive recurrence of walks on the half-line.

The one-step drift of a function ``h`` at site ``i`` is

    sum_k Tr(B_k rho B_k^*) h(k) - h(i),

where ``B_k`` is the transition matrix from ``i`` to ``k``.  It is affine in
``rho``: writing ``W_i = sum_k h(k) B_k^* B_k - h(i) I`` it equals
``Tr(W_i rho)``, so its supremum over every density is ``lambda_max(W_i)``.
Checks report both the value on a sampling grid and, when the grid stands
for all densities, that exact supremum.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .channel import SINK, DeadStateError, NearestNeighborRule
from .linalg import DensityMatrix, bloch_matrix, density

DEFAULT_EPSILON = 1e-6
ZERO_TOL = 1e-12
DEAD_TRACE = 1e-14

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


# ------------------------------------------------------------------ samplers


@dataclass(frozen=True)
class DensityGrid:
    """A finite set of densities standing in for "every density".

    ``covers_all`` marks grids whose verdicts may be upgraded with the exact
    eigenvalue supremum (the grid is then a sampling of the whole density
    set).  Reachable-set probes leave it ``False``: their certificate holds
    only for the probed densities.
    """

    samples: tuple
    scope: str
    covers_all: bool = True

    def __post_init__(self):
        if not self.samples:
            raise ValueError("density grid is empty")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def order(self) -> int:
        return self.samples[0].order

    def stack(self) -> np.ndarray:
        return np.stack([s.mat for s in self.samples])

    @classmethod
    def bloch(cls, points: int = 500, shells=(0.5, 0.0)) -> "DensityGrid":
        """Fibonacci spiral on the Bloch sphere plus scaled interior copies.

        A shell radius of 0 contributes the maximally mixed state once.
        """
        if points < 1:
            raise ValueError("points must be >= 1")
        k = np.arange(points) + 0.5
        zs = 1 - 2 * k / points
        phi = np.pi * (1 + np.sqrt(5)) * k
        r = np.sqrt(1 - zs * zs)
        xs, ys = r * np.cos(phi), r * np.sin(phi)
        out = [DensityMatrix(bloch_matrix(x, y, z)) for x, y, z in zip(xs, ys, zs)]
        for s in shells:
            if s == 0:
                out.append(DensityMatrix(np.eye(2) / 2))
            else:
                out += [DensityMatrix(bloch_matrix(s * x, s * y, s * z)) for x, y, z in zip(xs, ys, zs)]
        return cls(tuple(out), f"bloch grid ({len(out)} densities)")

    @classmethod
    def wishart(cls, order: int, count: int = 500, seed=None) -> "DensityGrid":
        """Random densities ``G G^* / Tr`` (half full rank, half pure) from complex Gaussians."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        out = []
        for c in range(count):
            cols = 1 if c % 2 else order
            g = rng.standard_normal((order, cols)) + 1j * rng.standard_normal((order, cols))
            m = g @ g.conj().T
            out.append(DensityMatrix(m / np.trace(m).real))
        return cls(tuple(out), f"random grid ({count} densities, order {order})")

    @classmethod
    def default(cls, order: int, count: int = 500, seed=None) -> "DensityGrid":
        return cls.bloch(count) if order == 2 else cls.wishart(order, count, seed)

    @classmethod
    def reachable(cls, rule: NearestNeighborRule, seeds=None, depth: int = 50,
                  site: int = 1, max_points: int = 5000) -> "DensityGrid":
        """Densities produced by the walk's moves from ``seeds`` within ``depth`` steps.

        Uses the bulk transition matrices at ``site``; duplicates (to 1e-12)
        are merged.  The default seed is the first basis state.
        """
        if seeds is None:
            seeds = [DensityMatrix.basis(rule.N, 0)]
        mats = [m for k, m in rule.transitions(site).items() if k != SINK]
        found: list = []
        keys: set = set()

        def add(rho: np.ndarray) -> bool:
            key = tuple(np.round(rho.ravel(), 12))
            if key in keys:
                return False
            keys.add(key)
            found.append(DensityMatrix((rho + rho.conj().T) / 2))
            return True

        frontier = []
        for s in seeds:
            m = density(s).mat
            if add(m):
                frontier.append(m)
        for _ in range(depth):
            nxt = []
            for rho in frontier:
                for b in mats:
                    out = b @ rho @ b.conj().T
                    tr = float(np.trace(out).real)
                    if tr < DEAD_TRACE:
                        continue
                    out = out / tr
                    if len(found) < max_points and add(out):
                        nxt.append(out)
            frontier = nxt
            if not frontier:
                break
        return cls(tuple(found), f"reachable set ({len(found)} densities, depth {depth})", False)


# ---------------------------------------------------------------- lyapunov


def linear_h(i: int) -> float:
    return float(i)


def quadratic_h(i: int) -> float:
    return float(i * i)


@dataclass(frozen=True)
class LyapunovSpec:
    """Test function ``h``, finite exceptional set ``F`` and margin ``epsilon``."""

    h: Callable[[int], float]
    F: frozenset
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "F", frozenset(int(s) for s in self.F))


def _h_of(h, k: int) -> float:
    # absorbed mass stays at site 0
    return h(0 if k == SINK else k)


def drift_operator(rule: NearestNeighborRule, i: int, h) -> np.ndarray:
    """Hermitian ``W_i`` with ``drift(rho) = Tr(W_i rho)``."""
    n = rule.N
    w = -h(i) * np.eye(n, dtype=complex)
    for k, b in rule.transitions(i).items():
        w += _h_of(h, k) * (b.conj().T @ b)
    return (w + w.conj().T) / 2


def one_step_drift(rule: NearestNeighborRule, rho, i: int, h=linear_h) -> float:
    """``sum_k Tr(B rho B^*) h(k) - h(i)`` for a walker at site ``i``."""
    rho = density(rho).mat
    total = 0.0
    for k, b in rule.transitions(i).items():
        total += float(np.trace(b @ rho @ b.conj().T).real) * _h_of(h, k)
    return total - h(i)


def _grid_values(w: np.ndarray, grid: DensityGrid) -> np.ndarray:
    return np.einsum("ab,tba->t", w, grid.stack()).real


@dataclass(frozen=True)
class DriftReport:
    """Outcome of a drift check.

    ``drifts`` maps each probed site to its per-sample values (same order as
    the grid).  ``sup_drift`` is the largest grid value outside ``F``;
    ``exact_sup`` is the supremum over all densities when the grid stands for
    all of them.  ``best_epsilon`` is the largest margin the evidence
    supports (non-positive when none).
    """

    verdict: str
    scope: str
    drifts: dict = field(repr=False)
    sup_drift: float
    exact_sup: float | None
    violations: list
    best_epsilon: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "scope": self.scope,
            "sup_drift": self.sup_drift,
            "exact_sup": self.exact_sup,
            "best_epsilon": self.best_epsilon,
            "violations": self.violations[:10],
            "violation_count": len(self.violations),
            **self.details,
        }


def _verdict(sup: float, epsilon: float) -> str:
    if sup <= -epsilon:
        return CERTIFIED
    if sup > ZERO_TOL:
        return REFUTED
    return INCONCLUSIVE


def _check_sites(rule, sites, h, grid, epsilon, kind: str):
    drifts, violations = {}, []
    sup, exact = -np.inf, -np.inf
    for i in sites:
        w = drift_operator(rule, i, h)
        vals = _grid_values(w, grid)
        drifts[i] = vals
        sup = max(sup, float(vals.max()))
        exact = max(exact, float(np.linalg.eigvalsh(w)[-1]))
        for t in np.flatnonzero(vals > -epsilon):
            violations.append({"site": int(i), "sample": int(t), "drift": float(vals[t]), "condition": kind})
    return drifts, violations, sup, exact


def _window(window) -> list:
    w = sorted({int(s) for s in window})
    if not w:
        raise ValueError("window is empty")
    if w[0] < 0:
        raise ValueError("window sites must be nonnegative")
    return w


def foster_check(rule: NearestNeighborRule, spec: LyapunovSpec, window, grid: DensityGrid) -> DriftReport:
    """Check the three Foster conditions for sites in ``window`` and densities in ``grid``.

    (1) ``h`` is finite and bounded below on the window, (2) the expected next
    value of ``h`` is finite on ``F`` and (3) the drift is at most
    ``-epsilon`` on ``window \\ F``.  A grid violation is a genuine
    counterexample; absence of violations certifies only the probed
    densities unless the exact eigenvalue supremum confirms it.
    """
    sites = _window(window)
    if not spec.F <= set(sites):
        raise ValueError("window must contain F")
    if grid.order != rule.N:
        raise ValueError("density grid order does not match the rule")
    hv = [spec.h(s) for s in sites]
    cond1 = bool(np.all(np.isfinite(hv)))
    f_vals = {}
    for i in sorted(spec.F):
        f_vals[i] = _grid_values(drift_operator(rule, i, spec.h), grid) + spec.h(i)
    cond2 = all(bool(np.all(np.isfinite(v))) for v in f_vals.values())
    outside = [s for s in sites if s not in spec.F]
    details = {"condition1": cond1, "condition2": cond2, "grid_size": len(grid),
               "sites_checked": len(outside)}
    if not cond1 or not cond2:
        return DriftReport(REFUTED, grid.scope, {}, float("nan"), None, [], float("nan"), details)
    if not outside:
        details["note"] = "condition (3) is vacuous: F covers the window"
        return DriftReport(CERTIFIED, grid.scope, {}, -np.inf, None, [], np.inf, details)
    drifts, violations, sup, exact = _check_sites(rule, outside, spec.h, grid, spec.epsilon, "3")
    return _finish(grid, drifts, violations, sup, exact, spec.epsilon, details)


def _finish(grid, drifts, violations, sup, exact, epsilon, details) -> DriftReport:
    verdict = _verdict(sup, epsilon)
    exact_sup = None
    scope = grid.scope
    if grid.covers_all:
        exact_sup = exact
        if verdict != REFUTED:
            # the affine drift attains its supremum at an eigenvector of W
            verdict = _verdict(exact, epsilon)
            scope = "all densities (eigenvalue bound)"
            if verdict == REFUTED:
                details["note"] = "grid satisfied, but some density outside the grid violates the bound"
    best = -(exact_sup if exact_sup is not None else sup)
    return DriftReport(verdict, scope, drifts, sup, exact_sup, violations, best, details)


def _is_homogeneous(rule: NearestNeighborRule) -> bool:
    return not rule.overrides and rule.boundary.kind != "segment"


def pakes_check(rule: NearestNeighborRule, window, grid: DensityGrid, epsilon: float = DEFAULT_EPSILON) -> DriftReport:
    """Eventually negative mean increment, with ``h(i) = i``.

    For a homogeneous rule every site ``i >= 1`` has the same drift, so the
    limit superior is the single-site supremum over densities.  Otherwise the
    largest sites of ``window`` (its upper half) stand in for the limit.
    """
    sites = _window(window)
    if grid.order != rule.N:
        raise ValueError("density grid order does not match the rule")
    if _is_homogeneous(rule):
        probe = [max(1, sites[-1])]
        how = "homogeneous: single bulk site"
    else:
        probe = sites[len(sites) // 2 :]
        how = f"window tail sites {probe[0]}..{probe[-1]}"
    drifts, violations, sup, exact = _check_sites(rule, probe, linear_h, grid, epsilon, "pakes")
    finite = all(np.isfinite(_grid_values(drift_operator(rule, s, linear_h), grid)).all() for s in sites)
    details = {"limsup_estimate": how, "finite_means": finite, "grid_size": len(grid)}
    if not finite:
        return DriftReport(REFUTED, grid.scope, drifts, sup, None, violations, float("nan"), details)
    return _finish(grid, drifts, violations, sup, exact, epsilon, details)


def dominated_drift_check(rule: NearestNeighborRule, window, grid: DensityGrid, bound: float) -> DriftReport:
    """Check every drift against a user-supplied dominating mean ``bound < 0``."""
    if bound >= 0:
        raise ValueError("dominating mean must be negative")
    sites = [s for s in _window(window) if s >= 1]
    drifts, violations, sup, exact = _check_sites(rule, sites, linear_h, grid, -bound, "dominated")
    details = {"bound": bound, "grid_size": len(grid)}
    top = exact if grid.covers_all else sup
    # exceeding the dominating mean is already a counterexample, even with negative drift
    verdict = CERTIFIED if top <= bound else REFUTED
    scope = "all densities (eigenvalue bound)" if grid.covers_all else grid.scope
    return DriftReport(verdict, scope, drifts, sup, exact if grid.covers_all else None,
                       violations, bound - top, details)


# ------------------------------------------------------------------- orbits


@dataclass(frozen=True)
class OrbitPoint:
    step: int
    density: DensityMatrix
    drift: float


def branch_density(b, rho) -> DensityMatrix:
    """``B rho B^* / Tr(B rho B^*)``; raises :class:`DeadStateError` on a dead branch."""
    rho = density(rho).mat
    out = b @ rho @ b.conj().T
    tr = float(np.trace(out).real)
    if tr < DEAD_TRACE:
        raise DeadStateError(f"branch has trace {tr:.3g}")
    out = out / tr
    return DensityMatrix((out + out.conj().T) / 2)


def orbit_drift_profile(rule: NearestNeighborRule, seed_density, branch_word_length: int,
                        site: int = 1, h=linear_h) -> list:
    """Drift along the normalized orbit ``L^n rho L^{n*}`` for ``n = 0..length``.

    The right branch is a reset for rank-one right moves and can be
    inspected with :func:`branch_density` on ``rule.R``.
    """
    if rule.N != 2:
        raise ValueError("orbit profile is defined for order-2 rules")
    rho = density(seed_density)
    out = [OrbitPoint(0, rho, one_step_drift(rule, rho, site, h))]
    for n in range(1, branch_word_length + 1):
        rho = branch_density(rule.L, rho)
        out.append(OrbitPoint(n, rho, one_step_drift(rule, rho, site, h)))
    return out


# ----------------------------------------------------------------- lamperti


def increment_moments(rule: NearestNeighborRule, rho, j: int) -> tuple[float, float]:
    """``(mu_1, mu_2)``: first two moments of the position increment from site ``j``."""
    rho = density(rho).mat
    m1 = m2 = 0.0
    for k, b in rule.transitions(j).items():
        d = (0 if k == SINK else k) - j
        p = float(np.trace(b @ rho @ b.conj().T).real)
        m1 += p * d
        m2 += p * d * d
    return m1, m2


def _lamperti_operator(rule: NearestNeighborRule, j: int) -> np.ndarray:
    n = rule.N
    w = np.zeros((n, n), dtype=complex)
    for k, b in rule.transitions(j).items():
        d = (0 if k == SINK else k) - j
        w += (2 * j * d + d * d) * (b.conj().T @ b)
    return (w + w.conj().T) / 2


def lamperti_check(rule: NearestNeighborRule, window, grid: DensityGrid, j0_scan=None,
                   epsilon: float = DEFAULT_EPSILON) -> DriftReport:
    """Find the smallest ``j0`` with ``2 j mu_1 + mu_2 < -epsilon`` for all ``j >= j0`` in the window.

    This is the Foster drift of ``h(x) = x^2`` outside ``F = {0, ..., j0 - 1}``.
    ``j0_scan`` restricts the candidate values (default: the window).
    """
    sites = [s for s in _window(window) if s >= 1]
    if not sites:
        raise ValueError("window needs a site >= 1")
    scan = sorted(set(sites if j0_scan is None else (int(j) for j in j0_scan)))
    worst, exact = {}, {}
    drifts = {}
    for j in sites:
        w = _lamperti_operator(rule, j)
        vals = _grid_values(w, grid)
        drifts[j] = vals
        top = float(vals.max())
        if grid.covers_all:
            exact[j] = float(np.linalg.eigvalsh(w)[-1])
            top = max(top, exact[j])
        worst[j] = top
    j0 = None
    for cand in scan:
        tail = [worst[j] for j in sites if j >= cand]
        if tail and max(tail) < -epsilon:
            j0 = cand
            break
    mu2 = [increment_moments(rule, s, sites[-1])[1] for s in list(grid)[: min(len(grid), 20)]]
    details = {"j0": j0, "mu2_sample": mu2[:5], "grid_size": len(grid), "window_top": sites[-1]}
    violations = [{"site": j, "worst": v} for j, v in worst.items() if v >= -epsilon]
    if j0 is None:
        verdict = INCONCLUSIVE
        sup = max(worst.values())
        best = -sup
    else:
        verdict = CERTIFIED
        sup = max(worst[j] for j in sites if j >= j0)
        best = -sup
    scope = grid.scope if not grid.covers_all else "all densities (eigenvalue bound)"
    exact_sup = max(exact.values()) if exact else None
    return DriftReport(verdict, scope, drifts, sup, exact_sup, violations, best, details)
