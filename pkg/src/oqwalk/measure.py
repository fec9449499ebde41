"""Matrix measures, matrix Chebyshev polynomials and the spectral route.

For a symmetric block tridiagonal matrix with constant blocks ``A`` (off
diagonal, positive definite) and ``B`` (diagonal, Hermitian), the matrix
polynomials ``x U_n = A^* U_{n+1} + B U_n + A U_{n-1}`` are orthonormal for the
weight

    W(x) = (1 / 2 pi) A^{-1/2} sqrt+(4 I - K(x)^2) A^{-1/2},
    K(x) = A^{-1/2} (B - x I) A^{-1/2},

where ``sqrt+`` clips negative eigenvalues to zero.  Block powers of the walk
are then moments ``int x^n U_i dW U_j^*`` of that weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .channel import BlockTridiagonalChannel, NearestNeighborRule
from .errors import InapplicableRouteError, QuadratureError
from .linalg import (
    as_matrix,
    commutator_norm,
    conj_rep,
    density,
    is_hermitian,
    is_normal,
    pd_inv_sqrt,
    unvec,
    vec,
)

COMMUTE_TOL = 1e-12
QUAD_TOL = 1e-13
QUAD_START = 16
QUAD_MAX = 4096
DETTE_TOL = 1e-9
SINGULAR_COND = 1e12

DETTE_SINGULAR_MSG = "singular A_n: Dette Theorem inapplicable"


@lru_cache(maxsize=None)
def _gl_theta(n: int):
    """Gauss-Legendre nodes and weights mapped to ``[0, pi]`` (read-only, cached)."""
    t, w = np.polynomial.legendre.leggauss(n)
    th, wt = np.pi / 2 * (t + 1), np.pi / 2 * w
    th.flags.writeable = False
    wt.flags.writeable = False
    return th, wt


def _adaptive(rule: Callable[[int], np.ndarray], tol: float = QUAD_TOL) -> np.ndarray:
    """Double the node count until two successive results agree."""
    n = QUAD_START
    prev = rule(n)
    while n < QUAD_MAX:
        n *= 2
        cur = rule(n)
        scale = max(1.0, float(np.max(np.abs(cur), initial=0.0)))
        if float(np.max(np.abs(cur - prev), initial=0.0)) <= tol * scale:
            return cur
        prev = cur
    raise QuadratureError(f"quadrature did not converge with {QUAD_MAX} nodes")


@dataclass(frozen=True)
class SemicircleWeight:
    """Scalar weight ``sqrt(4 a^2 - (x - c)^2) / (2 pi a^2)`` on ``[c - 2a, c + 2a]``.

    It integrates to one; ``scale`` is the half-amplitude ``a``.
    """

    center: float
    scale: float

    @property
    def support(self) -> tuple[float, float]:
        return self.center - 2 * self.scale, self.center + 2 * self.scale

    def density(self, x):
        x = np.asarray(x, dtype=float)
        a = self.scale
        return np.sqrt(np.clip(4 * a * a - (x - self.center) ** 2, 0.0, None)) / (2 * np.pi * a * a)

    def nodes(self, n: int):
        """Nodes ``x`` and weights so that ``sum w f(x) ~ int f(x) w(x) dx``."""
        th, wt = _gl_theta(n)
        return self.center + 2 * self.scale * np.cos(th), wt * (2 / np.pi) * np.sin(th) ** 2

    def integrate(self, f) -> float:
        def rule(n):
            x, w = self.nodes(n)
            return np.asarray(np.sum(w * f(x)))

        return float(np.real(_adaptive(rule)))


@dataclass(frozen=True)
class MatrixMeasure:
    """Matrix weight built from a positive definite ``A`` and Hermitian ``B``.

    When ``A`` and ``B`` commute the weight is ``sum_k w_k(x) v_k v_k^*`` with a
    fixed unitary ``basis`` (columns ``v_k``) and semicircle ``weights``.
    Otherwise ``basis`` and ``weights`` are ``None`` and the density is formed
    pointwise from the matrix square root.
    """

    order: int
    A: np.ndarray
    B: np.ndarray
    left_factor: np.ndarray
    basis: np.ndarray | None = None
    weights: tuple | None = None

    @property
    def commuting(self) -> bool:
        return self.basis is not None

    def breakpoints(self) -> np.ndarray:
        """Points where the weight's support or smoothness changes."""
        if self.commuting:
            pts = [p for w in self.weights for p in w.support]
        else:
            pts = list(np.linalg.eigvalsh(self.B - 2 * self.A)) + list(np.linalg.eigvalsh(self.B + 2 * self.A))
        pts = np.sort(np.asarray(pts, dtype=float))
        keep = [pts[0]]
        for p in pts[1:]:
            if p - keep[-1] > 1e-12:
                keep.append(p)
        return np.asarray(keep)

    def support(self) -> tuple[float, float]:
        bp = self.breakpoints()
        return float(bp[0]), float(bp[-1])

    def density(self, x) -> np.ndarray:
        """Weight matrix at ``x`` (scalar) or a stack of them (array ``x``)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if self.commuting:
            vals = np.stack([w.density(xs) for w in self.weights], axis=-1)
            out = np.einsum("ak,mk,bk->mab", self.basis, vals, self.basis.conj())
        else:
            out = self._pointwise(xs)
        return out[0] if np.ndim(x) == 0 else out

    def _pointwise(self, xs: np.ndarray) -> np.ndarray:
        s = self.left_factor
        k = s @ self.B @ s
        kx = k[None] - xs[:, None, None] * (s @ s)[None]
        kap, vecs = np.linalg.eigh(kx)
        root = np.sqrt(np.clip(4 - kap**2, 0.0, None))
        mid = np.einsum("mak,mk,mbk->mab", vecs, root, vecs.conj())
        return (s[None] @ mid @ s[None]) / (2 * np.pi)

    def integrate_sandwich(self, left, right=None) -> np.ndarray:
        """``int left(x) dW(x) right(x)^*``.

        ``left`` and ``right`` map an array of points to a stack of matrices
        (shape ``(m, p, order)``); ``right`` defaults to ``left``.
        """
        right = left if right is None else right
        if self.commuting:
            groups = self._groups()

            def rule(n):
                total = 0
                for w, cols in groups:
                    x, wt = w.nodes(n)
                    lv = left(x) @ cols
                    rv = right(x) @ cols
                    total = total + np.einsum("m,mar,mbr->ab", wt, lv, rv.conj())
                return total

            return _adaptive(rule)

        bp = self.breakpoints()

        def rule(n):
            th, wt = _gl_theta(n)
            total = 0
            for a, b in zip(bp[:-1], bp[1:]):
                c, h = (a + b) / 2, (b - a) / 2
                x = c + h * np.cos(th)
                jac = wt * h * np.sin(th)
                wx = self._pointwise(x)
                total = total + np.einsum("m,map,mpq,mbq->ab", jac, left(x), wx, right(x).conj())
            return total

        return _adaptive(rule)

    def _groups(self):
        groups: dict = {}
        for k, w in enumerate(self.weights):
            key = (round(w.center, 12), round(w.scale, 12))
            groups.setdefault(key, (w, []))[1].append(k)
        return [(w, self.basis[:, idx]) for w, idx in groups.values()]

    def moment(self, k: int) -> np.ndarray:
        eye = np.eye(self.order)
        return self.integrate_sandwich(
            lambda x: (x[:, None, None] ** k) * eye[None], lambda x: np.broadcast_to(eye, (x.size,) + eye.shape)
        )


def _check_pd_hermitian(A, B, tol: float = 1e-10):
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square of the same order")
    if not is_hermitian(A, tol) or float(np.linalg.eigvalsh((A + A.conj().T) / 2).min()) <= tol:
        raise InapplicableRouteError("A is not positive definite")
    if not is_hermitian(B, tol):
        raise InapplicableRouteError("B is not Hermitian")
    return (A + A.conj().T) / 2, (B + B.conj().T) / 2


def joint_eigenbasis(A, B, tol: float = 1e-9):
    """Unitary ``V`` and eigenvalues ``(alpha, beta)`` diagonalizing commuting Hermitian ``A, B``."""
    a_vals, a_vecs = np.linalg.eigh(A)
    cols, alphas, betas = [], [], []
    start = 0
    while start < len(a_vals):
        stop = start + 1
        while stop < len(a_vals) and a_vals[stop] - a_vals[start] <= tol * max(1.0, abs(a_vals[start])):
            stop += 1
        sub = a_vecs[:, start:stop]
        b_sub = sub.conj().T @ B @ sub
        b_vals, b_vecs = np.linalg.eigh((b_sub + b_sub.conj().T) / 2)
        block = sub @ b_vecs
        for k in range(stop - start):
            cols.append(block[:, k])
            alphas.append(float(np.real(block[:, k].conj() @ A @ block[:, k])))
            betas.append(float(b_vals[k]))
        start = stop
    return np.stack(cols, axis=1), np.asarray(alphas), np.asarray(betas)


def duran_measure(A, B) -> MatrixMeasure:
    """Orthogonality weight of the Chebyshev recurrence with blocks ``A`` and ``B``.

    ``A`` must be positive definite and ``B`` Hermitian (tolerance ``1e-10``).
    If they commute the weight is assembled from a single joint eigenbasis.
    """
    A, B = _check_pd_hermitian(A, B)
    d = A.shape[0]
    s = pd_inv_sqrt(A)
    if commutator_norm(A, B) <= COMMUTE_TOL:
        V, alphas, betas = joint_eigenbasis(A, B)
        weights = tuple(SemicircleWeight(float(b), float(a)) for a, b in zip(alphas, betas))
        return MatrixMeasure(d, A, B, s, V, weights)
    return MatrixMeasure(d, A, B, s)


def _diag_entries(m, what: str) -> np.ndarray:
    m = as_matrix(m)
    if float(np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0)) > 1e-12:
        raise ValueError(f"{what} is not diagonal")
    return np.diag(m)


def diag_measure(L, R) -> MatrixMeasure:
    """Weight for the walk induced by diagonal ``L``, ``R`` without loops.

    The symmetrized walk has off-diagonal block ``A = ([L][R])^{1/2}``, which
    is diagonal with entries ``sqrt(l_a l_b r_a r_b)``, and ``B = 0``.
    """
    l = _diag_entries(L, "L")
    r = _diag_entries(R, "R")
    if np.any(np.abs(l) < 1e-14) or np.any(np.abs(r) < 1e-14):
        raise InapplicableRouteError(DETTE_SINGULAR_MSG)
    if np.any(np.abs(np.imag(l)) > 1e-14) or np.any(np.abs(np.imag(r)) > 1e-14) or np.any(l.real <= 0) or np.any(r.real <= 0):
        raise ValueError("diagonal entries must be real and in (0, 1); rotate phases away first")
    a = np.sqrt(np.outer(l.real * r.real, l.real * r.real)).reshape(-1)
    A = np.diag(a).astype(complex)
    return duran_measure(A, np.zeros_like(A))


def semicircle_moment(c: float, k: int) -> float:
    """``int x^k`` against the semicircle weight of half-amplitude ``c``, by quadrature.

    Equals ``c^k`` times the ``k/2``-th Catalan number for even ``k`` and zero for odd ``k``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    return SemicircleWeight(0.0, float(c)).integrate(lambda x: x**k)


@dataclass
class MatrixPolynomialSeq:
    """Matrix polynomials ``x Q_n = A_n Q_{n+1} + B_n Q_n + C_n^T Q_{n-1}``.

    ``up``, ``diag`` and ``down`` map ``n`` to ``A_n``, ``B_n`` and ``C_n^T``.
    """

    up: Callable[[int], np.ndarray]
    diag: Callable[[int], np.ndarray]
    down: Callable[[int], np.ndarray]
    order: int
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def constant(cls, up, diag, down) -> "MatrixPolynomialSeq":
        up, diag, down = as_matrix(up), as_matrix(diag), as_matrix(down)
        return cls(lambda n: up, lambda n: diag, lambda n: down, up.shape[0])

    @classmethod
    def duran(cls, A, B) -> "MatrixPolynomialSeq":
        """``x U_n = A^* U_{n+1} + B U_n + A U_{n-1}``."""
        A = as_matrix(A)
        return cls.constant(A.conj().T, B, A)

    def evaluate(self, xs, up_to: int) -> np.ndarray:
        """Stack of shape ``(up_to + 1, len(xs), order, order)``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        d = self.order
        eye = np.eye(d, dtype=complex)
        out = np.empty((up_to + 1, xs.size, d, d), dtype=complex)
        prev = np.zeros((xs.size, d, d), dtype=complex)
        cur = np.broadcast_to(eye, (xs.size, d, d)).copy()
        out[0] = cur
        for n in range(up_to):
            a_n = self.up(n)
            if np.linalg.cond(a_n) > SINGULAR_COND:
                raise np.linalg.LinAlgError(f"A_{n} is singular")
            rhs = xs[:, None, None] * cur - self.diag(n)[None] @ cur - self.down(n)[None] @ prev
            nxt = np.linalg.solve(a_n[None], rhs)
            prev, cur = cur, nxt
            out[n + 1] = cur
        return out

    def at(self, x: float, up_to: int) -> list:
        key = (float(x), up_to)
        if key not in self._cache:
            self._cache[key] = list(self.evaluate([x], up_to)[:, 0])
        return self._cache[key]


def eval_polynomials(seq: MatrixPolynomialSeq, x: float, up_to: int) -> list:
    """``[Q_0(x), ..., Q_up_to(x)]`` by the forward recurrence."""
    return seq.at(x, up_to)


def _degree_picker(seq: MatrixPolynomialSeq, deg: int, power: int = 0):
    def f(x):
        q = seq.evaluate(x, deg)[deg]
        return q if power == 0 else (x[:, None, None] ** power) * q

    return f


def km_block(measure: MatrixMeasure, polys: MatrixPolynomialSeq, i: int, j: int, n: int) -> np.ndarray:
    """``int x^n Q_i(x) dW(x) Q_j(x)^*``: the ``(i, j)`` block of the symmetrized power."""
    return measure.integrate_sandwich(_degree_picker(polys, i, n), _degree_picker(polys, j))


@dataclass(frozen=True)
class SymmetrizerSequence:
    """Nonsingular matrices ``R_n`` (``R_0 = I``) conjugating a walk to a symmetric one."""

    generator: Callable[[int], np.ndarray]
    order: int

    def __call__(self, n: int) -> np.ndarray:
        r = as_matrix(self.generator(n))
        if np.linalg.cond(r) > SINGULAR_COND:
            raise np.linalg.LinAlgError(f"R_{n} is singular")
        return r

    @classmethod
    def identity(cls, order: int) -> "SymmetrizerSequence":
        eye = np.eye(order, dtype=complex)
        return cls(lambda n: eye, order)

    @classmethod
    def powers(cls, G) -> "SymmetrizerSequence":
        """``R_n = G^n``."""
        G = as_matrix(G)
        return cls(lambda n: np.linalg.matrix_power(G, n), G.shape[0])


def km_propagator(measure, polys, symmetrizer: SymmetrizerSequence, i: int, j: int, n: int) -> np.ndarray:
    """Propagator ``i -> j`` in ``n`` steps recovered from the spectral integral.

    Equals ``R_j (Q^n)_{ji} R_i^{-1}``; when the blocks commute this is the
    familiar ``R_i^{-1} (Q^n)_{ij} R_j``.
    """
    q = km_block(measure, polys, j, i, n)
    return symmetrizer(j) @ q @ np.linalg.inv(symmetrizer(i))


def km_probability(measure, polys, symmetrizer, rho, i: int, j: int, n: int) -> float:
    """Probability of reaching ``j`` from ``i`` in ``n`` steps by the spectral route."""
    rho = density(rho)
    blk = km_propagator(measure, polys, symmetrizer, i, j, n)
    return float(np.trace(unvec(blk @ vec(rho.mat), rho.order)).real)


@dataclass(frozen=True)
class DetteReport:
    passed: bool
    depth: int
    first_failure: int | None
    failed_condition: int | None
    max_residual: float


def check_dette_conditions(channel: BlockTridiagonalChannel, R: SymmetrizerSequence, depth: int) -> DetteReport:
    """Verify the two symmetrizability conditions up to index ``depth``.

    With ``A_n``, ``B_n`` and ``C_n^T`` the blocks in positions ``(n, n+1)``,
    ``(n, n)`` and ``(n, n-1)``: ``R_n B_n R_n^{-1}`` must be symmetric and
    ``R_n^T R_n = C_n^{-1} ... C_1^{-1} R_0^T R_0 A_0 ... A_{n-1}``.
    """
    if channel.sites < depth + 2:
        raise ValueError(f"channel needs at least {depth + 2} sites for depth {depth}")
    d = channel.N**2
    A = [channel.block(n, n + 1) for n in range(depth + 1)]
    C = [None] + [channel.block(n, n - 1).T for n in range(1, depth + 1)]
    for m in A[:depth] + C[1:]:
        if np.linalg.cond(m) > SINGULAR_COND:
            raise InapplicableRouteError(DETTE_SINGULAR_MSG)
    worst = 0.0
    r0 = R(0)
    left = np.eye(d, dtype=complex)  # C_n^{-1} ... C_1^{-1}
    right = r0.T @ r0  # R_0^T R_0 A_0 ... A_{n-1}
    for n in range(depth + 1):
        rn = R(n)
        s = rn @ channel.block(n, n) @ np.linalg.inv(rn)
        res1 = float(np.max(np.abs(s - s.T), initial=0.0))
        worst = max(worst, res1)
        if res1 > DETTE_TOL:
            return DetteReport(False, depth, n, 1, worst)
        if n >= 1:
            left = np.linalg.inv(C[n]) @ left
            right = right @ A[n - 1]
            target = left @ right
            res2 = float(np.max(np.abs(rn.T @ rn - target)) / max(1.0, float(np.max(np.abs(target)))))
            worst = max(worst, res2)
            if res2 > DETTE_TOL:
                return DetteReport(False, depth, n, 2, worst)
    return DetteReport(True, depth, None, None, worst)


@dataclass(frozen=True)
class KMModel:
    """A walk for which the spectral route applies, with everything it needs.

    ``rotation`` is a unitary ``U``; densities are mapped to ``U^* rho U``
    before the spectral formula is used (identity except for normal pairs).
    """

    case: str
    measure: MatrixMeasure
    polys: MatrixPolynomialSeq
    symmetrizer: SymmetrizerSequence
    rotation: np.ndarray
    reduced_rule: NearestNeighborRule

    def propagator(self, i: int, j: int, n: int) -> np.ndarray:
        """Propagator in the walk's original basis."""
        blk = km_propagator(self.measure, self.polys, self.symmetrizer, i, j, n)
        cu = conj_rep(self.rotation)
        return cu @ blk @ cu.conj().T

    def probability(self, rho, i: int, j: int, n: int) -> float:
        rho = density(rho)
        u = self.rotation
        rotated = u.conj().T @ rho.mat @ u
        rotated = (rotated + rotated.conj().T) / 2
        return km_probability(self.measure, self.polys, self.symmetrizer, rotated, i, j, n)


def _is_positive_diag(m) -> bool:
    m = as_matrix(m)
    off = m - np.diag(np.diag(m))
    d = np.diag(m)
    return float(np.max(np.abs(off), initial=0.0)) <= 1e-12 and bool(
        np.all(np.abs(d.imag) <= 1e-14) and np.all(d.real > 1e-14)
    )


def diagonal_model(L, R) -> KMModel:
    """Spectral model for diagonal ``L``, ``R`` with entries in ``(0, 1)``."""
    measure = diag_measure(L, R)
    cl, cr = conj_rep(L), conj_rep(R)
    A = measure.A
    sym = SymmetrizerSequence.powers(np.sqrt(np.diag(cr).real / np.diag(cl).real) * np.eye(A.shape[0]))
    rule = NearestNeighborRule(L, R)
    n = as_matrix(L).shape[0]
    return KMModel("diagonal", measure, MatrixPolynomialSeq.duran(A, measure.B), sym, np.eye(n, dtype=complex), rule)


def km_model(rule: NearestNeighborRule) -> KMModel:
    """Pick the constructive case matching ``rule``.

    Supported: diagonal pairs, normal pairs (reduced to diagonal ones through
    the eigenbasis of ``L^* L``), and lazy walks with ``L = R = a``, ``[a]``
    positive definite and ``[loop]`` Hermitian.  Anything else raises
    :class:`InapplicableRouteError` naming the failed hypothesis.
    """
    if rule.boundary.kind != "absorbing" or rule.overrides:
        raise InapplicableRouteError("spectral route needs a homogeneous walk with an absorbing boundary")
    L, R, B = rule.L, rule.R, rule.B
    if B is None:
        if np.linalg.cond(L) > SINGULAR_COND or np.linalg.cond(R) > SINGULAR_COND:
            raise InapplicableRouteError(DETTE_SINGULAR_MSG)
        if _is_positive_diag(L) and _is_positive_diag(R):
            return diagonal_model(L, R)
        if is_normal(L) and is_normal(R):
            lam, u = np.linalg.eigh(L.conj().T @ L)
            if np.any(lam <= 1e-14) or np.any(lam >= 1 - 1e-14):
                raise InapplicableRouteError(DETTE_SINGULAR_MSG)
            model = diagonal_model(np.diag(np.sqrt(lam)), np.diag(np.sqrt(1 - lam)))
            return KMModel("normal", model.measure, model.polys, model.symmetrizer, u, model.reduced_rule)
    if float(np.max(np.abs(L - R))) <= 1e-12:
        A = conj_rep(L)
        Bm = conj_rep(B) if B is not None else np.zeros_like(A)
        measure = duran_measure(A, Bm)
        n = L.shape[0]
        return KMModel("lazy", measure, MatrixPolynomialSeq.duran(measure.A, measure.B),
                       SymmetrizerSequence.identity(A.shape[0]), np.eye(n, dtype=complex), rule)
    raise InapplicableRouteError(
        "no constructive matrix measure: pair is neither diagonal, normal, nor lazy with L = R"
    )


__all__ = [
    "DETTE_SINGULAR_MSG",
    "DetteReport",
    "KMModel",
    "MatrixMeasure",
    "MatrixPolynomialSeq",
    "SemicircleWeight",
    "SymmetrizerSequence",
    "check_dette_conditions",
    "diag_measure",
    "duran_measure",
    "eval_polynomials",
    "joint_eigenbasis",
    "km_block",
    "km_model",
    "km_probability",
    "km_propagator",
    "semicircle_moment",
]
