"""Gambler's ruin for open quantum walks on a segment ``{0, ..., M}``.

The ends ``0`` and ``M`` carry identity loops.  With ``Phi`` the one-step map
on the stacked vec-space, ``Q`` the projector onto interior sites, ``P`` onto
site ``M`` and ``S`` onto both ends, the first-visit generating functions are

    F(z) = P Phi (I - z Q Phi)^{-1},    G(z) = S Phi (I - z Q Phi)^{-1}.

``F(1)`` gives the probability of reaching ``M`` before ``0`` and
``1 + Tr G'(1)`` the expected absorption time, with
``G'(1) = S Phi (I - Q Phi)^{-1} Q Phi (I - Q Phi)^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .channel import BoundaryCondition, NearestNeighborRule
from .errors import NotAbsorbingError
from .linalg import DensityMatrix, as_matrix, conj_rep, density, unvec, vec

MARGIN_TOL = 1e-12
COMPLETENESS_TOL = 1e-9


@dataclass(frozen=True)
class SegmentChannel:
    """Full representation of a walk on ``{0, ..., M}`` with absorbing ends.

    Coordinates are ordered site-major: entry ``site * N**2 + a`` holds
    component ``a`` of ``vec(rho_site)``.  ``phi @ x`` is one step.
    """

    M: int
    N: int
    phi: np.ndarray
    rule: NearestNeighborRule = field(repr=False)

    @property
    def dim(self) -> int:
        return (self.M + 1) * self.N**2

    def _mask(self, sites) -> np.ndarray:
        m = np.zeros(self.dim)
        n2 = self.N**2
        for s in sites:
            m[s * n2 : (s + 1) * n2] = 1.0
        return m

    @cached_property
    def P(self) -> np.ndarray:
        """Diagonal of the projector onto site ``M``."""
        return self._mask([self.M])

    @cached_property
    def Q(self) -> np.ndarray:
        """Diagonal of the projector onto the interior ``1..M-1``."""
        return self._mask(range(1, self.M))

    @cached_property
    def S(self) -> np.ndarray:
        """Diagonal of the projector onto the ends ``{0, M}``."""
        return self._mask([0, self.M])

    @cached_property
    def interior_step(self) -> np.ndarray:
        """``Q Phi``."""
        return self.Q[:, None] * self.phi

    @cached_property
    def spectral_margin(self) -> float:
        """``1 - spectral radius of Q Phi``."""
        return 1.0 - float(np.max(np.abs(np.linalg.eigvals(self.interior_step))))

    @cached_property
    def _lu(self):
        self.require_absorbing()
        return lu_factor(np.eye(self.dim) - self.interior_step)

    def require_absorbing(self) -> None:
        if self.spectral_margin <= MARGIN_TOL:
            raise NotAbsorbingError(
                f"interior not absorbing (spectral margin {self.spectral_margin:.3g})"
            )

    def localized(self, rho, k: int) -> np.ndarray:
        """Stacked vector of ``rho`` placed at site ``k``."""
        mat = rho.mat if isinstance(rho, DensityMatrix) else as_matrix(rho)
        if mat.shape != (self.N, self.N):
            raise ValueError(f"expected an order-{self.N} matrix")
        if not 0 <= k <= self.M:
            raise ValueError(f"site {k} outside 0..{self.M}")
        v = np.zeros(self.dim, dtype=complex)
        n2 = self.N**2
        v[k * n2 : (k + 1) * n2] = vec(mat)
        return v

    def site_density(self, x: np.ndarray, site: int) -> np.ndarray:
        n2 = self.N**2
        return unvec(x[site * n2 : (site + 1) * n2], self.N)

    def traces(self, x: np.ndarray) -> np.ndarray:
        """Per-site traces of a stacked vector (or of each column of a matrix)."""
        n2 = self.N**2
        diag = np.arange(self.N) * (self.N + 1)
        x = np.asarray(x)
        blocks = x.reshape((self.M + 1, n2) + x.shape[1:])
        return blocks[:, diag].sum(axis=1)


def segment_from_rule(rule: NearestNeighborRule) -> SegmentChannel:
    """Assemble the segment matrix of a rule whose boundary is a segment."""
    bc = rule.boundary
    if bc.kind != "segment":
        raise ValueError("rule boundary must be a segment")
    M, N = bc.M, rule.N
    if M < 3:
        raise ValueError(f"gambler's ruin needs M >= 3, got M={M}")
    n2 = N * N
    phi = np.zeros(((M + 1) * n2, (M + 1) * n2), dtype=complex)
    for i in range(M + 1):
        for j, m in rule.transitions(i).items():
            phi[j * n2 : (j + 1) * n2, i * n2 : (i + 1) * n2] += conj_rep(m)
    return SegmentChannel(M, N, phi, rule)


def build_segment(L, R, M: int, B=None) -> SegmentChannel:
    """Segment walk on ``{0, ..., M}`` moving by ``L``/``R`` with optional loop ``B``.

    Raises :class:`~oqwalk.channel.NormalizationError` if
    ``L^*L + R^*R (+ B^*B) != I`` and ``ValueError`` for ``M < 3``.
    """
    if int(M) < 3:
        raise ValueError(f"gambler's ruin needs M >= 3, got M={M}")
    rule = NearestNeighborRule(L, R, B, BoundaryCondition.segment(int(M)))
    return segment_from_rule(rule)


def resolvent_apply(seg: SegmentChannel, z: float, v) -> np.ndarray:
    """Solve ``(I - z Q Phi) x = v``.  ``v`` may be a vector or a matrix of columns."""
    if not 0 <= z <= 1:
        raise ValueError("z must lie in [0, 1]")
    v = np.asarray(v, dtype=complex)
    if z == 1:
        return lu_solve(seg._lu, v)
    return np.linalg.solve(np.eye(seg.dim) - z * seg.interior_step, v)


def first_visit_functions(seg: SegmentChannel, z: float, rho, k: int) -> tuple[float, float]:
    """``(Tr F(z) v, Tr G(z) v)`` for ``v = rho`` at site ``k``."""
    v = seg.localized(rho, k)
    out = seg.phi @ resolvent_apply(seg, z, v)
    t = seg.traces(out).real
    return float(t[seg.M]), float(t[0] + t[seg.M])


@dataclass(frozen=True)
class FirstVisitResult:
    """Outcome of a gambler's-ruin query.

    ``spectral_margin`` is ``None`` for routes that do not build the segment
    matrix.  ``goal_density`` and ``ruin_density`` are the unnormalized
    densities deposited at ``M`` and ``0``, when the route provides them.
    """

    p_reach: float
    expected_time: float
    p_ruin: float
    spectral_margin: float | None = None
    goal_density: np.ndarray | None = field(default=None, repr=False)
    ruin_density: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "p": self.p_reach,
            "E": self.expected_time,
            "p_ruin": self.p_ruin,
            "spectral_margin": self.spectral_margin,
        }


def _check_k(seg_or_M, k: int) -> None:
    M = seg_or_M.M if isinstance(seg_or_M, SegmentChannel) else int(seg_or_M)
    if not 1 <= k <= M - 1:
        raise ValueError(f"need 1 <= k <= M-1, got k={k}, M={M}")


def _absorption_columns(seg: SegmentChannel, V: np.ndarray):
    """Absorbed vector and time vector for each column of ``V``."""
    x = resolvent_apply(seg, 1.0, V)
    absorbed = seg.phi @ x
    y = resolvent_apply(seg, 1.0, seg.interior_step @ x)
    timed = seg.phi @ y
    return absorbed, timed


def absorption_stats(seg: SegmentChannel, rho, k: int) -> FirstVisitResult:
    """Reach probability, ruin probability and expected absorption time from ``rho`` at ``k``.

    Raises :class:`~oqwalk.errors.NotAbsorbingError` when the interior does
    not leak to the ends and ``AssertionError`` if the two absorption
    probabilities fail to sum to one.
    """
    _check_k(seg, k)
    rho = density(rho)
    v = seg.localized(rho, k)
    absorbed, timed = _absorption_columns(seg, v)
    ta = seg.traces(absorbed).real
    tt = seg.traces(timed).real
    p, ruin = float(ta[seg.M]), float(ta[0])
    if abs(p + ruin - 1) > COMPLETENESS_TOL:
        raise AssertionError(f"absorption probabilities sum to {p + ruin!r}")
    e = 1.0 + float(tt[0] + tt[seg.M])
    return FirstVisitResult(
        p, e, ruin, seg.spectral_margin,
        seg.site_density(absorbed, seg.M), seg.site_density(absorbed, 0),
    )


@dataclass(frozen=True)
class AbsorptionFunctionals:
    """``p = Tr(reach rho)`` and ``E = Tr(time rho)`` as Hermitian matrices."""

    reach: np.ndarray
    time: np.ndarray

    @staticmethod
    def _coords(w: np.ndarray) -> dict:
        return {
            "rho11": float(w[0, 0].real),
            "rho22": float(w[1, 1].real),
            "re12": float(2 * w[0, 1].real),
            "im12": float(2 * w[0, 1].imag),
        }

    def reach_coords(self) -> dict:
        """For order 2: ``p = rho11*a + rho22*b + re12*Re(rho12) + im12*Im(rho12)``."""
        return self._coords(self.reach)

    def time_coords(self) -> dict:
        return self._coords(self.time)


def absorption_functionals(seg: SegmentChannel, k: int) -> AbsorptionFunctionals:
    """The linear functionals behind :func:`absorption_stats` at start site ``k``."""
    _check_k(seg, k)
    n, n2 = seg.N, seg.N**2
    V = np.zeros((seg.dim, n2), dtype=complex)
    V[k * n2 : (k + 1) * n2, :] = np.eye(n2)
    absorbed, timed = _absorption_columns(seg, V)
    ta, tt = seg.traces(absorbed), seg.traces(timed)
    # Column c is vec(E_ab) with c = a*n + b; Tr(W E_ab) = W[b, a].
    wp = ta[seg.M].reshape(n, n).T
    we = (tt[0] + tt[seg.M]).reshape(n, n).T + np.eye(n)
    return AbsorptionFunctionals(wp, we)


def hermitian_basis_check(seg: SegmentChannel, k: int, tol: float = 1e-10) -> bool:
    f = absorption_functionals(seg, k)
    return bool(
        np.allclose(f.reach, f.reach.conj().T, atol=tol)
        and np.allclose(f.time, f.time.conj().T, atol=tol)
    )


# ----------------------------------------------------------------- rotations


def rotation_rule(t: float) -> tuple[np.ndarray, np.ndarray]:
    """``L = [[0, 0], [s, -t]]`` and ``R = [[t, s], [0, 0]]`` with ``s = sqrt(1 - t^2)``."""
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    s = np.sqrt(1 - t * t)
    L = np.array([[0, 0], [s, -t]], dtype=complex)
    R = np.array([[t, s], [0, 0]], dtype=complex)
    return L, R


def _rotation_f(M: int, k: int) -> int:
    return k * (M - k) - k


def _rotation_g(M: int, k: int) -> int:
    return -(k * (M - k) - (2 * k - 1))


def _rho_parts(rho) -> tuple[float, float, float]:
    rho = density(rho)
    if rho.order != 2:
        raise ValueError("rotation family needs an order-2 density")
    return float(rho.mat[0, 0].real), float(rho.mat[1, 1].real), rho.re12


def rotation_closed_form(t: float, M: int, k: int, rho) -> FirstVisitResult:
    """Closed-form reach probability and mean absorption time for the rotation family."""
    if not 0 < t < 1:
        raise ValueError("closed form needs 0 < t < 1; use degenerate_rotation for t in {0, 1}")
    if M < 3:
        raise ValueError(f"closed form needs M >= 3, got M={M}")
    _check_k(M, k)
    r11, r22, x = _rho_parts(rho)
    s = np.sqrt(1 - t * t)
    p = (2 * t * s * x + r11 * ((k - 1) - (k - 2) * t * t) + r22 * k * (1 - t * t)) / (
        M - 1 - (M - 2) * t * t
    )
    e = (
        1
        + (_rotation_f(M, M - k) / t**2 + _rotation_g(M, M - k)) * r11
        + (_rotation_f(M, k) / t**2 + _rotation_g(M, k)) * r22
        + (2 * M - 4 * k) * s * x / t
    )
    return FirstVisitResult(float(p), float(e), float(1 - p))


def degenerate_rotation(t: float, M: int, k: int, rho) -> FirstVisitResult:
    """Documented values of the rotation family at ``t = 0`` and ``t = 1`` for ``M = 3``.

    At ``t = 0`` the walk can bounce between sites 1 and 2 forever, so these
    numbers describe only the paths that do get absorbed in one step; the
    resolvent route reports a non-absorbing interior there.
    """
    if t not in (0, 1) or M != 3:
        raise ValueError("degenerate branch covers t in {0, 1} with M = 3 only")
    _check_k(M, k)
    r11, _, _ = _rho_parts(rho)
    if t == 0:
        p = 0.0 if k == 1 else 1.0 - r11
        return FirstVisitResult(p, 1.0, 1.0 - p)
    e = 1.0 + r11 if k == 1 else 2.0 - r11
    return FirstVisitResult(r11, e, 1.0 - r11)


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class MeanTimeShape:
    """Coefficients of ``E_k = 1 + a_k rho11 + b_k rho22 + c_k Re(rho12) + d_k Im(rho12)``.

    Since ``rho11 + rho22 = 1`` only ``a_k - b_k`` is determined; the fit
    reports ``b_k`` as the value at ``rho = E22`` and ``a_k`` at ``E11``.  The
    symmetric shape ``1 + h(M - k) rho11 + h(k) rho22 + j(k) Re(rho12)`` with
    ``j(k) = -j(M - k)`` holds for some ``h`` exactly when ``a_k - b_k`` is
    odd under ``k -> M - k``, ``c_k`` is odd as well and every ``d_k`` is zero.
    The three residuals measure how far a walk is from it.
    """

    M: int
    a: tuple
    b: tuple
    c: tuple
    d: tuple
    mirror_residual: float
    antisymmetry_residual: float
    imaginary_residual: float

    @property
    def holds(self) -> bool:
        return max(self.mirror_residual, self.antisymmetry_residual, self.imaginary_residual) < 1e-9


def mean_time_shape(L, R, M: int) -> MeanTimeShape:
    """Fit the mean-absorption-time coefficients of an order-2 walk for every start site."""
    seg = build_segment(L, R, M)
    if seg.N != 2:
        raise ValueError("mean_time_shape needs order-2 matrices")
    a, b, c, d = [], [], [], []
    for k in range(1, M):
        co = absorption_functionals(seg, k).time_coords()
        a.append(co["rho11"] - 1)
        b.append(co["rho22"] - 1)
        c.append(co["re12"])
        d.append(co["im12"])
    idx = range(M - 1)
    gap = [a[i] - b[i] for i in idx]
    mirror = max(abs(gap[i] + gap[M - 2 - i]) for i in idx)
    anti = max(abs(c[i] + c[M - 2 - i]) for i in idx)
    imag = max(abs(v) for v in d)
    return MeanTimeShape(M, tuple(a), tuple(b), tuple(c), tuple(d), mirror, anti, imag)
