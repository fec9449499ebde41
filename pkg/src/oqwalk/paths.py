"""Exact path counting on the half-line and closed forms for block powers.

Counts are Python integers (arbitrary precision); conversion to floating
point happens only when a count multiplies a matrix or a probability.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .channel import NearestNeighborRule
from .errors import InapplicableRouteError
from .linalg import as_matrix, commutator_norm, conj_rep, density, is_normal, unvec, vec


def binom(n: int, k: int) -> int:
    """Binomial coefficient, zero outside ``0 <= k <= n``."""
    if n < 0 or k < 0 or k > n:
        return 0
    return comb(n, k)


def catalan(k: int) -> int:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return comb(2 * k, k) // (k + 1)


def count_paths(i: int, j: int, n: int) -> int:
    """Number of ``n``-step nearest-neighbour walks ``i -> j`` that stay in ``{0, 1, ...}``.

    Reflection principle: ``C(n, (n+i-j)/2) - C(n, (n+i+j)/2 + 1)`` when
    ``n + i + j`` is even, else zero.
    """
    if min(i, j, n) < 0:
        raise ValueError("i, j, n must be nonnegative")
    if (n + i + j) % 2:
        return 0
    return binom(n, (n + i - j) // 2) - binom(n, (n + i + j) // 2 + 1)


def count_paths_dp(i: int, j: int, n: int) -> int:
    """Same count by dynamic programming over the walk (reference implementation)."""
    width = i + n + 2
    ways = [0] * width
    ways[i] = 1
    for _ in range(n):
        nxt = [0] * width
        for s, w in enumerate(ways):
            if w:
                if s > 0:
                    nxt[s - 1] += w
                if s + 1 < width:
                    nxt[s + 1] += w
        ways = nxt
    return ways[j] if j < width else 0


def chebyshev_coefficients(n: int) -> list:
    """``[(power, coeff)]`` with ``P_n = sum coeff * P_1^power``."""
    return [(n - 2 * j, (-1) ** j * binom(n - j, j)) for j in range(n // 2 + 1)]


def first_degree(A, B, x) -> np.ndarray:
    """``P_1(x) = x A^{-1} - A^{-1} B``."""
    A, B = as_matrix(A), as_matrix(B)
    ainv = np.linalg.inv(A)
    return x * ainv - ainv @ B


def closed_poly_eval(P1, n: int) -> np.ndarray:
    """``sum_j (-1)^j C(n-j, j) P1^(n-2j)`` for a given first-degree value ``P1``.

    With ``P1 = x A^{-1} - A^{-1} B`` this is the degree-``n`` polynomial of the
    recurrence ``x P_n = A P_{n+1} + B P_n + A P_{n-1}``.
    """
    P1 = as_matrix(P1)
    d = P1.shape[0]
    out = np.zeros((d, d), dtype=complex)
    powers = {0: np.eye(d, dtype=complex)}
    for p in range(1, n + 1):
        powers[p] = powers[p - 1] @ P1
    for p, c in chebyshev_coefficients(n):
        out += c * powers[p]
    return out


def block_power_zero_loop(A, i: int, j: int, n: int) -> np.ndarray:
    """``N(i, j, n) A^n``: block ``(i, j)`` of the ``n``-th power with no loops."""
    A = as_matrix(A)
    c = count_paths(i, j, n)
    if c == 0:
        return np.zeros_like(A)
    return float(c) * np.linalg.matrix_power(A, n)


def catalan_double_sum(i: int, j: int, n: int) -> int:
    """``sum_{l,r} (-1)^(l+r) C(i-l, l) C(j-r, r) Cat((n+i+j)/2 - l - r)``; zero for odd parity."""
    if (n + i + j) % 2:
        return 0
    half = (n + i + j) // 2
    total = 0
    for l in range(i // 2 + 1):
        for r in range(j // 2 + 1):
            total += (-1) ** (l + r) * binom(i - l, l) * binom(j - r, r) * catalan(half - l - r)
    return total


def catalan_double_sum_block(A, i: int, j: int, n: int) -> np.ndarray:
    """Block power for diagonal ``A`` and no loops, via the Catalan double sum."""
    A = as_matrix(A)
    if float(np.max(np.abs(A - np.diag(np.diag(A))), initial=0.0)) > 1e-12:
        raise ValueError("A must be diagonal")
    c = catalan_double_sum(i, j, n)
    if c == 0:
        return np.zeros_like(A)
    return float(c) * np.diag(np.diag(A) ** n)


def diagonal_walk_probability(p, rho, i: int, j: int, n: int) -> float:
    """Probability ``i -> j`` in ``n`` steps for ``L = diag(sqrt p)``, ``R = diag(sqrt(1-p))``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("every p_k must lie in (0, 1)")
    rho = density(rho)
    if rho.order != p.size:
        raise ValueError("density order does not match len(p)")
    c = count_paths(i, j, n)
    if c == 0:
        return 0.0
    left, right = (n + i - j) // 2, (n - i + j) // 2
    diag = np.diag(rho.mat).real
    return float(c) * float(np.sum(diag * p**left * (1 - p) ** right))


def unitary_diag_block(G, D, i: int, j: int, n: int, tol: float = 1e-10) -> np.ndarray:
    """Block power of a walk with commuting normal left block ``G`` and right block ``D``.

    Equals ``N(i, j, n) G^((n+i-j)/2) D^((n-i+j)/2)``: every path uses the same
    number of left and right moves, and the blocks commute.  Both exponents are
    integers whenever the count is nonzero, so no root branch has to be chosen.
    """
    G, D = as_matrix(G), as_matrix(D)
    if commutator_norm(G, D) > tol or not is_normal(G, tol) or not is_normal(D, tol):
        raise ValueError("G and D are not simultaneously unitarily diagonalizable")
    c = count_paths(i, j, n)
    if c == 0:
        return np.zeros_like(G)
    left, right = (n + i - j) // 2, (n - i + j) // 2
    return float(c) * np.linalg.matrix_power(G, left) @ np.linalg.matrix_power(D, right)


def block_power_commuting(A, B, i: int, j: int, n: int) -> np.ndarray:
    """``sum_k C(n, k) N(i, j, k) A^k B^(n-k)`` for commuting off-diagonal ``A`` and loop ``B``."""
    A, B = as_matrix(A), as_matrix(B)
    if commutator_norm(A, B) > 1e-10:
        raise ValueError("A and B do not commute")
    out = np.zeros_like(A)
    apow = np.eye(A.shape[0], dtype=complex)
    for k in range(n + 1):
        c = binom(n, k) * count_paths(i, j, k)
        if c:
            out += float(c) * apow @ np.linalg.matrix_power(B, n - k)
        apow = apow @ A
    return out


def path_count_propagator(rule: NearestNeighborRule, i: int, j: int, n: int) -> np.ndarray:
    """Order-``N^2`` propagator from the counting formulas, when one applies.

    Valid for homogeneous walks with an absorbing boundary and either no loops
    and commuting normal representations of ``L``, ``R``, or ``L = R`` with a
    loop whose representation commutes with that of ``L``.
    """
    if rule.boundary.kind != "absorbing" or rule.overrides:
        raise InapplicableRouteError("path counting needs a homogeneous walk with an absorbing boundary")
    G, D = conj_rep(rule.L), conj_rep(rule.R)
    if rule.B is None:
        try:
            return unitary_diag_block(G, D, i, j, n)
        except ValueError as exc:
            raise InapplicableRouteError(f"path counting inapplicable: {exc}") from exc
    if float(np.max(np.abs(rule.L - rule.R))) > 1e-12:
        raise InapplicableRouteError("path counting with loops needs L = R")
    try:
        return block_power_commuting(G, conj_rep(rule.B), i, j, n)
    except ValueError as exc:
        raise InapplicableRouteError(f"path counting inapplicable: {exc}") from exc


def path_count_probability(rule: NearestNeighborRule, rho, i: int, j: int, n: int) -> float:
    rho = density(rho)
    blk = path_count_propagator(rule, i, j, n)
    return float(np.trace(unvec(blk @ vec(rho.mat), rho.order)).real)
