"""Nearest-neighbour open quantum walks on the half-line and on segments.

A walk moves a density ``rho`` sitting at site ``i`` to site ``j`` with
probability ``Tr(B rho B^*)``, where ``B`` is the transition matrix of the edge
``i -> j``.  This module builds finite truncations of such walks, evolves
lattice states exactly and samples quantum trajectories.

Block convention
----------------
``channel.blocks[(i, j)]`` is the conjugation representation ``[B]`` of the
transition from ``i`` to ``j``.  One step acts on vectorized site densities as
``vec(rho_j') = sum_i blocks[(i, j)] @ vec(rho_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    KRAUS_TOL,
    DensityMatrix,
    as_matrix,
    conj_rep,
    density,
    is_psd,
    unvec,
    vec,
)

PROB_FLOOR = 1e-14
DEFAULT_STEP_CAP = 10**6
SINK = -1


class NormalizationError(ValueError):
    """Transition matrices do not form a valid probability rule."""


class TruncationError(RuntimeError):
    """A state or query reaches the artificial right edge of a truncation."""


class DeadStateError(RuntimeError):
    """Every outgoing branch of a trajectory has negligible probability."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Behaviour of the walk at the left end (and right end for segments).

    ``kind`` is ``"absorbing"``, ``"reflecting"`` or ``"segment"``.  A
    reflecting boundary uses the stay matrix ``b00`` and the move-right matrix
    ``b01`` at site 0; when they are omitted the rule's own ``L`` and ``R`` are
    used.  A segment boundary on ``{0, ..., M}`` places identity loops at both
    ends.
    """

    kind: str = "absorbing"
    b00: np.ndarray | None = None
    b01: np.ndarray | None = None
    M: int | None = None

    def __post_init__(self):
        if self.kind not in ("absorbing", "reflecting", "segment"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "segment" and (self.M is None or int(self.M) < 1):
            raise ValueError("segment boundary needs M >= 1")
        if (self.b00 is None) != (self.b01 is None):
            raise ValueError("reflecting boundary needs both b00 and b01")

    @classmethod
    def absorbing(cls) -> "BoundaryCondition":
        return cls("absorbing")

    @classmethod
    def reflecting(cls, b00=None, b01=None) -> "BoundaryCondition":
        if b00 is not None:
            b00, b01 = as_matrix(b00), as_matrix(b01)
        return cls("reflecting", b00, b01)

    @classmethod
    def segment(cls, M: int) -> "BoundaryCondition":
        return cls("segment", M=int(M))


@dataclass(frozen=True)
class NearestNeighborRule:
    """Transition data of a nearest-neighbour walk.

    Parameters
    ----------
    L, R : array_like
        Move-left and move-right matrices of order ``N``.
    B : array_like, optional
        Loop (stay) matrix.  ``None`` means no loop.
    boundary : BoundaryCondition
    overrides : dict, optional
        ``site -> (L, B, R)`` replacing the homogeneous matrices at that site.
        ``B`` may be ``None``.
    """

    L: np.ndarray
    R: np.ndarray
    B: np.ndarray | None = None
    boundary: BoundaryCondition = field(default_factory=BoundaryCondition)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        L, R = as_matrix(self.L), as_matrix(self.R)
        n = L.shape[0]
        if L.shape != (n, n) or R.shape != (n, n):
            raise ValueError("L and R must be square of the same order")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)
        if self.B is not None:
            object.__setattr__(self, "B", _square(self.B, n))
        ov = {}
        for site, triple in dict(self.overrides).items():
            l, b, r = triple
            ov[int(site)] = (_square(l, n), None if b is None else _square(b, n), _square(r, n))
        object.__setattr__(self, "overrides", ov)
        bc = self.boundary
        if bc.kind == "reflecting" and bc.b00 is not None:
            _square(bc.b00, n)
            _square(bc.b01, n)
        self.validate()

    @property
    def N(self) -> int:
        return self.L.shape[0]

    @property
    def has_loops(self) -> bool:
        return self.B is not None or any(b is not None for _, b, _ in self.overrides.values())

    def local(self, site: int):
        """The ``(L, B, R)`` triple used at an interior ``site``."""
        if site in self.overrides:
            return self.overrides[site]
        return self.L, self.B, self.R

    def transitions(self, site: int) -> dict:
        """Map ``destination -> matrix`` for a walker at ``site``.

        The key :data:`SINK` collects mass absorbed at the left boundary.
        """
        bc = self.boundary
        l, b, r = self.local(site)
        if bc.kind == "segment":
            if site == 0 or site == bc.M:
                return {site: np.eye(self.N, dtype=complex)}
            if not 0 < site < bc.M:
                raise ValueError(f"site {site} outside segment 0..{bc.M}")
        elif site < 0:
            raise ValueError("negative site")
        elif site == 0:
            if bc.kind == "reflecting":
                if bc.b00 is not None:
                    return {0: as_matrix(bc.b00), 1: as_matrix(bc.b01)}
                if b is not None:
                    raise NormalizationError(
                        "reflecting boundary with loops needs explicit b00/b01 matrices"
                    )
                return {0: l, 1: r}
            out = {1: r, SINK: l}
            if b is not None:
                out[0] = b
            return out
        out = {site - 1: l, site + 1: r}
        if b is not None:
            out[site] = b
        return out

    def validate(self, tol: float = KRAUS_TOL) -> None:
        """Raise :class:`NormalizationError` if a site fails ``sum B^* B = I``."""
        eye = np.eye(self.N)
        sites = {1} | set(self.overrides)
        bc = self.boundary
        if bc.kind == "segment":
            sites = {s for s in sites if 0 < s < bc.M} or set()
        else:
            sites.add(0)
        for s in sorted(sites):
            mats = self.transitions(s)
            total = sum(m.conj().T @ m for k, m in mats.items() if k != SINK)
            if s == 0 and bc.kind == "absorbing":
                if not is_psd(eye - total, tol):
                    raise NormalizationError("site 0 outgoing matrices are not sub-stochastic")
                continue
            res = float(np.max(np.abs(total - eye)))
            if res > tol:
                raise NormalizationError(f"sum B^*B != I at site {s} (residual {res:.3g})")


def _square(m, n: int) -> np.ndarray:
    m = as_matrix(m)
    if m.shape != (n, n):
        raise ValueError(f"expected an order-{n} matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class BlockTridiagonalChannel:
    """Finite truncation (sites ``0..sites-1``) of a walk's block matrix."""

    rule: NearestNeighborRule
    sites: int
    blocks: dict
    transitions: dict
    finite: bool

    @property
    def N(self) -> int:
        return self.rule.N

    def block(self, i: int, j: int) -> np.ndarray:
        n2 = self.N**2
        return self.blocks.get((i, j), np.zeros((n2, n2), dtype=complex))


def build_channel(rule: NearestNeighborRule, sites: int | None = None) -> BlockTridiagonalChannel:
    """Assemble the block representation of ``rule`` on ``sites`` sites.

    For a segment boundary the number of sites is ``M + 1`` and ``sites`` may
    be omitted.  Transitions from the last site of a half-line truncation to
    the site beyond it are dropped; :func:`step` refuses states that would use
    them.
    """
    bc = rule.boundary
    finite = bc.kind == "segment"
    if finite:
        if sites is not None and sites != bc.M + 1:
            raise ValueError(f"segment walk has exactly {bc.M + 1} sites")
        sites = bc.M + 1
    if sites is None or sites < 2:
        raise ValueError("need at least 2 sites")
    blocks, trans = {}, {}
    for i in range(sites):
        for j, m in rule.transitions(i).items():
            if j == SINK or j >= sites:
                continue
            trans[(i, j)] = m
            blocks[(i, j)] = conj_rep(m)
    return BlockTridiagonalChannel(rule, int(sites), blocks, trans, finite)


def channel_for_query(rule: NearestNeighborRule, i: int, j: int, n: int) -> BlockTridiagonalChannel:
    """Channel truncated just large enough for an exact ``n``-step query."""
    if rule.boundary.kind == "segment":
        return build_channel(rule)
    return build_channel(rule, max(2, max(i, j) + n + 1))


@dataclass
class LatticeState:
    """Unnormalized site densities ``{site: rho_site}`` plus absorbed mass."""

    entries: dict
    absorbed: float = 0.0

    @classmethod
    def localized(cls, rho, site: int) -> "LatticeState":
        return cls({int(site): np.array(density(rho).mat)})

    @property
    def total_trace(self) -> float:
        return float(sum(np.trace(m).real for m in self.entries.values()))

    def site_probability(self, site: int) -> float:
        m = self.entries.get(site)
        return 0.0 if m is None else float(np.trace(m).real)

    def support(self) -> list:
        return sorted(s for s, m in self.entries.items() if np.any(m != 0))


def step(channel: BlockTridiagonalChannel, state: LatticeState) -> LatticeState:
    """Apply the walk once: ``rho_k' = sum_i B rho_i B^*`` over edges ``i -> k``."""
    rule = channel.rule
    new: dict = {}
    absorbed = state.absorbed
    for i, rho in state.entries.items():
        if not np.any(rho != 0):
            continue
        if not 0 <= i < channel.sites:
            raise TruncationError(f"site {i} lies outside the truncation")
        for k, b in rule.transitions(i).items():
            out = b @ rho @ b.conj().T
            if k == SINK:
                absorbed += float(np.trace(out).real)
                continue
            if k >= channel.sites:
                if np.trace(out).real > 0:
                    raise TruncationError(
                        f"mass reaches site {k} beyond the truncation of {channel.sites} sites"
                    )
                continue
            new[k] = new[k] + out if k in new else out
    return LatticeState(new, absorbed)


def evolve(channel: BlockTridiagonalChannel, state: LatticeState, n: int) -> LatticeState:
    for _ in range(n):
        state = step(channel, state)
    return state


def block_power_entry(channel: BlockTridiagonalChannel, i: int, j: int, n: int) -> np.ndarray:
    """Order-``N^2`` propagator of ``n`` steps from site ``i`` to site ``j``.

    This is the sum over all ``n``-step paths ``i -> ... -> j`` of the
    time-ordered product ``[B_n] ... [B_1]`` of the blocks along the path, so
    that ``unvec(result @ vec(rho))`` is the density found at ``j``.  When the
    blocks commute (every constructive case handled by this package) it equals
    the ``(i, j)`` block of the ``n``-th power of the block matrix.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not channel.finite and channel.sites < max(i, j) + n + 1:
        raise TruncationError(
            f"query ({i},{j},{n}) needs at least {max(i, j) + n + 1} sites, have {channel.sites}"
        )
    n2 = channel.N**2
    if not (0 <= i < channel.sites and 0 <= j < channel.sites):
        raise ValueError("site index outside the truncation")
    front = {i: np.eye(n2, dtype=complex)}
    for _ in range(n):
        nxt: dict = {}
        for k, x in front.items():
            for dest in (k - 1, k, k + 1):
                blk = channel.blocks.get((k, dest))
                if blk is None:
                    continue
                y = blk @ x
                nxt[dest] = nxt[dest] + y if dest in nxt else y
        front = nxt
    return front.get(j, np.zeros((n2, n2), dtype=complex))


def transition_probability(channel: BlockTridiagonalChannel, rho, i: int, j: int, n: int) -> float:
    """Probability ``Tr(unvec(block @ vec(rho)))`` of being at ``j`` after ``n`` steps."""
    rho = density(rho)
    blk = block_power_entry(channel, i, j, n)
    out = unvec(blk @ vec(rho.mat), channel.N)
    return float(np.trace(out).real)


def _trap_sites(rule: NearestNeighborRule) -> set:
    if rule.boundary.kind == "segment":
        return {0, rule.boundary.M}
    return set()


def sample_trajectory(rule: NearestNeighborRule, rho0, i0: int, horizon: int, seed=None) -> list:
    """Sample one quantum trajectory.

    Returns a list of ``(site, DensityMatrix)`` pairs starting with
    ``(i0, rho0)``.  At each step the destination is drawn with probability
    ``Tr(B rho B^*)`` and the density is renormalized.  The path stops when it
    is absorbed (recorded as site :data:`SINK`), when it reaches an end of a
    segment, or after ``horizon`` steps.
    """
    rng = np.random.default_rng(seed)
    rho = np.array(density(rho0).mat)
    site = int(i0)
    traps = _trap_sites(rule)
    path = [(site, DensityMatrix(rho))]
    for _ in range(horizon):
        if site in traps:
            break
        dests, outs, probs = [], [], []
        for k, b in rule.transitions(site).items():
            out = b @ rho @ b.conj().T
            p = float(np.trace(out).real)
            if p < PROB_FLOOR:
                continue
            dests.append(k)
            outs.append(out)
            probs.append(p)
        if not dests:
            raise DeadStateError(f"no branch with probability >= {PROB_FLOOR} at site {site}")
        probs = np.asarray(probs)
        choice = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        choice = min(choice, len(dests) - 1)
        rho = outs[choice] / probs[choice]
        rho = (rho + rho.conj().T) / 2
        site = dests[choice]
        path.append((site, DensityMatrix(rho / np.trace(rho).real)))
        if site == SINK:
            break
    return path


@dataclass(frozen=True)
class HittingEstimate:
    """Monte Carlo estimate of hitting a target set.

    ``mean_time`` is the mean hitting time over the paths that hit; ``hits``
    splits those paths by the first target reached.
    """

    estimate: float
    stderr: float
    mean_time: float
    mean_time_stderr: float
    hits: dict
    censored: int
    trials: int

    def probability_of(self, site: int) -> tuple[float, float]:
        """Fraction of trials whose first target was ``site`` and its standard error."""
        p = self.hits.get(site, 0) / self.trials
        return p, float(np.sqrt(p * (1 - p) / self.trials))


class _MoveTable:
    """Per-site stacks of transition matrices for vectorized sampling."""

    def __init__(self, rule: NearestNeighborRule):
        self.rule = rule
        self._cache: dict = {}

    def key(self, site: int):
        rule = self.rule
        if site in rule.overrides or site <= 0:
            return site
        if rule.boundary.kind == "segment" and site >= rule.boundary.M:
            return site
        return "bulk"

    def get(self, site: int):
        key = self.key(site)
        if key not in self._cache:
            trans = self.rule.transitions(site)
            dests = list(trans)
            kraus = np.stack([trans[d] for d in dests])
            offsets = np.array([SINK if d == SINK else d - site for d in dests])
            sink = np.array([d == SINK for d in dests])
            self._cache[key] = (kraus, offsets, sink)
        return self._cache[key]


def monte_carlo_hitting(
    rule: NearestNeighborRule,
    rho0,
    i0: int,
    targets,
    trials: int,
    seed=None,
    step_cap: int = DEFAULT_STEP_CAP,
    batch_size: int = 1 << 15,
) -> HittingEstimate:
    """Estimate the probability and mean time of ever reaching ``targets``.

    Trajectories are simulated in vectorized batches; batch ``c`` uses an
    independent stream spawned from ``SeedSequence(seed)``.  Paths still
    running after ``step_cap`` steps are counted as censored (and as misses).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    targets = {int(t) for t in targets}
    rho0 = np.array(density(rho0).mat)
    table = _MoveTable(rule)
    traps = _trap_sites(rule)
    hit_time = np.full(trials, -1, dtype=np.int64)
    hit_site = np.full(trials, SINK - 1, dtype=np.int64)
    censored = 0
    n_batches = -(-trials // batch_size)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    for c in range(n_batches):
        lo, hi = c * batch_size, min(trials, (c + 1) * batch_size)
        rng = np.random.Generator(np.random.PCG64(streams[c]))
        censored += _run_batch(table, traps, rho0, int(i0), targets, step_cap, rng,
                                hit_time[lo:hi], hit_site[lo:hi])
    hit = hit_time >= 0
    p = float(hit.mean())
    stderr = float(np.sqrt(p * (1 - p) / trials))
    times = hit_time[hit].astype(float)
    if times.size:
        mean_t = float(times.mean())
        se_t = float(times.std(ddof=1) / np.sqrt(times.size)) if times.size > 1 else 0.0
    else:
        mean_t, se_t = float("nan"), float("nan")
    hits = {t: int(np.sum(hit_site == t)) for t in sorted(targets)}
    return HittingEstimate(p, stderr, mean_t, se_t, hits, censored, trials)


def _run_batch(table, traps, rho0, i0, targets, step_cap, rng, hit_time, hit_site) -> int:
    size = hit_time.size
    if i0 in targets:
        hit_time[:] = 0
        hit_site[:] = i0
        return 0
    if i0 in traps:
        return 0
    rho = np.broadcast_to(rho0, (size,) + rho0.shape).copy()
    sites = np.full(size, i0, dtype=np.int64)
    alive = np.ones(size, dtype=bool)
    t = 0
    while alive.any() and t < step_cap:
        t += 1
        act = np.flatnonzero(alive)
        u = rng.random(act.size)
        uniq, inv = np.unique(sites[act], return_inverse=True)
        groups: dict = {}
        for pos, s in enumerate(uniq):
            groups.setdefault(table.key(int(s)), []).append(pos)
        for members in groups.values():
            sel = np.isin(inv, members)
            idx = act[sel]
            kraus, offsets, sink = table.get(int(sites[idx[0]]))
            out = np.einsum("mab,tbc,mdc->tmad", kraus, rho[idx], kraus.conj())
            probs = np.einsum("tmaa->tm", out).real
            probs[probs < PROB_FLOOR] = 0.0
            total = probs.sum(axis=1)
            if np.any(total <= 0):
                raise DeadStateError("trajectory reached a state with no viable branch")
            cum = np.cumsum(probs, axis=1)
            choice = (u[sel, None] * total[:, None] >= cum).sum(axis=1)
            choice = np.minimum(choice, probs.shape[1] - 1)
            # never pick a zero-probability branch at the cumulative edge
            for _ in range(probs.shape[1]):
                bad = probs[np.arange(idx.size), choice] == 0
                if not bad.any():
                    break
                choice[bad] -= 1
            rows = np.arange(idx.size)
            new = out[rows, choice] / probs[rows, choice][:, None, None]
            rho[idx] = new
            absorbed = sink[choice]
            sites[idx] = np.where(absorbed, SINK, sites[idx] + offsets[choice])
        now = sites[act]
        for s in targets:
            reached = act[now == s]
            hit_time[reached] = t
            hit_site[reached] = s
            alive[reached] = False
        alive[act[now == SINK]] = False
        for s in traps:
            alive[act[now == s]] = False
    return int(alive.sum())
