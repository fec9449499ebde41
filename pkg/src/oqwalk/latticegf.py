"""Generating functions for strip-confined lattice paths and the Hadamard ruin problem.

All arithmetic is exact: polynomials carry Python integers and rational
values use :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .linalg import density

ExactRational = Fraction
HALF = Fraction(1, 2)


@dataclass(frozen=True)
class IntPolynomial:
    """Polynomial in ``z`` with integer coefficients (index = power)."""

    coeffs: tuple

    def __post_init__(self):
        c = [int(v) for v in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> int:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __add__(self, other: "IntPolynomial") -> "IntPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        return IntPolynomial(tuple(self[k] + other[k] for k in range(n)))

    def __sub__(self, other: "IntPolynomial") -> "IntPolynomial":
        return self + other.scale(-1)

    def __mul__(self, other: "IntPolynomial") -> "IntPolynomial":
        if not self.coeffs or not other.coeffs:
            return IntPolynomial(())
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return IntPolynomial(tuple(out))

    def scale(self, c: int) -> "IntPolynomial":
        return IntPolynomial(tuple(c * a for a in self.coeffs))

    def shift(self, k: int) -> "IntPolynomial":
        """Multiply by ``z^k``."""
        return IntPolynomial((0,) * k + self.coeffs)

    def derivative(self) -> "IntPolynomial":
        return IntPolynomial(tuple(k * a for k, a in enumerate(self.coeffs) if k))

    def __call__(self, z):
        acc = 0 * z
        for a in reversed(self.coeffs):
            acc = acc * z + a
        return acc


def fibonacci_poly(t: int) -> IntPolynomial:
    """``f(z, t) = sum_i (-1)^i C(t-i, i) z^(2i)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    c = [0] * (t + 1)
    for i in range(t // 2 + 1):
        c[2 * i] = (-1) ** i * comb(t - i, i)
    return IntPolynomial(tuple(c))


def fibonacci_product(t: int, z: float) -> float:
    """``prod_{k=1..t} (1 - 2 z cos(k pi / (t+1)))``; equals ``f(z, t)``."""
    k = np.arange(1, t + 1)
    return float(np.prod(1 - 2 * z * np.cos(k * np.pi / (t + 1))))


@dataclass(frozen=True)
class RationalGF:
    """``z^shift * numerator(z) / denominator(z)`` with ``denominator(0) != 0``."""

    numerator: IntPolynomial
    denominator: IntPolynomial
    shift: int = 0

    def __post_init__(self):
        if self.denominator[0] == 0:
            raise ValueError("denominator must have a nonzero constant term")
        if self.shift < 0:
            raise ValueError("shift must be nonnegative")

    def __call__(self, z):
        return z**self.shift * self.numerator(z) / self.denominator(z)

    def derivative(self) -> "RationalGF":
        n, d, s = self.numerator, self.denominator, self.shift
        core = n.derivative() * d - n * d.derivative()
        if s == 0:
            return RationalGF(core, d * d, 0)
        return RationalGF(n.scale(s) * d + core.shift(1), d * d, s - 1)


def boundary_gf(s: int, t: int) -> RationalGF:
    """``B(z, s, t) = z^s f(z, t) / f(z, t+s+1)``.

    ``[z^k]`` counts length-``k`` paths from 0 to ``s`` that stay within ``[-t, s]``.
    """
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    return RationalGF(fibonacci_poly(t), fibonacci_poly(t + s + 1), s)


def series_coeffs(gf: RationalGF, up_to: int) -> list:
    """Exact coefficients ``[z^0] ... [z^up_to]`` by power-series long division."""
    d = gf.denominator
    d0 = d[0]
    m = up_to + 1 - gf.shift
    q: list = []
    for k in range(max(m, 0)):
        acc = gf.numerator[k] - sum(d[j] * q[k - j] for j in range(1, min(k, d.degree) + 1))
        if acc % d0:
            raise ArithmeticError("series has non-integer coefficients")
        q.append(acc // d0)
    return [0] * min(gf.shift, up_to + 1) + q


def strip_paths_dp(s: int, t: int, length: int, start: int = 0) -> int:
    """Number of length-``length`` paths ``start -> s`` inside ``[-t, s]`` (reference)."""
    lo, hi = -t, s
    ways = {start: 1} if lo <= start <= hi else {}
    for _ in range(length):
        nxt: dict = {}
        for h, w in ways.items():
            for step in (-1, 1):
                g = h + step
                if lo <= g <= hi:
                    nxt[g] = nxt.get(g, 0) + w
        ways = nxt
    return ways.get(s, 0)


def _check_km(k: int, M: int):
    if M < 2 or not 1 <= k <= M - 1:
        raise ValueError(f"need 1 <= k <= M-1, got k={k}, M={M}")


def first_move_counts(k: int, M: int, j: int) -> tuple[int, int]:
    """Counts ``(u(j), d(j))`` of length-``j`` paths ``k -> M-1`` inside ``[1, M-1]``.

    ``u`` counts paths whose first step is up, ``d`` those whose first step is
    down.  Removing the first step turns each family into a strip count
    starting one level higher or lower.
    """
    _check_km(k, M)
    if j < 1:
        raise ValueError("j must be >= 1")
    s, t = M - 1 - k, k - 1
    up = series_coeffs(boundary_gf(s - 1, t + 1), j - 1)[j - 1] if s >= 1 else 0
    down = series_coeffs(boundary_gf(s + 1, t - 1), j - 1)[j - 1] if t >= 1 else 0
    return up, down


@dataclass(frozen=True)
class Affine:
    """Exact ``const + coeff * Re(rho_12)``."""

    const: Fraction
    coeff: Fraction

    def __call__(self, x) -> float:
        return float(self.const) + float(self.coeff) * float(x)

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.const + other.const, self.coeff + other.coeff)

    def __str__(self) -> str:
        sign = "-" if self.coeff < 0 else "+"
        return f"{self.const} {sign} {abs(self.coeff)}*Re(rho12)"


def _branch_values(k: int, M: int) -> tuple:
    """``(prob, time)`` sums for the up-first and down-first families ending in ``M``.

    A family with total length generating function ``z * C(z)`` contributes
    ``C(1/2)/2`` to the probability and ``(C(1/2) + C'(1/2)/2)/2`` to the
    expected time, since each length-``T`` word has trace ``2^{-T}(1 +- 2x)``.
    """
    s, t = M - 1 - k, k - 1
    z = HALF
    up_val = Fraction(1 if k == M - 1 else 0)
    up_der = Fraction(0)
    if s >= 1:
        g = boundary_gf(s - 1, t + 1)
        up_val += z * g(z)
        up_der += g(z) + z * g.derivative()(z)
    down_val = down_der = Fraction(0)
    if t >= 1:
        g = boundary_gf(s + 1, t - 1)
        down_val = z * g(z)
        down_der = g(z) + z * g.derivative()(z)
    phi = (up_val / 2, down_val / 2)
    psi = ((up_val + up_der / 2) / 2, (down_val + down_der / 2) / 2)
    return phi, psi


def hadamard_ruin_affine(k: int, M: int) -> tuple[Affine, Affine, Affine]:
    """Exact ``(p_goal, expected_time, p_ruin)`` as affine functions of ``Re(rho_12)``.

    Uses the strip generating functions at ``z = 1/2``; the ruin side is the
    mirrored problem started from ``M - k`` with the roles of up and down
    exchanged.
    """
    _check_km(k, M)
    (pu, pd), (eu, ed) = _branch_values(k, M)
    p_goal = Affine(pu + pd, 2 * (pu - pd))
    e_goal = Affine(eu + ed, 2 * (eu - ed))
    (ru, rd), (fu, fd) = _branch_values(M - k, M)
    p_ruin = Affine(ru + rd, -2 * (ru - rd))
    e_ruin = Affine(fu + fd, -2 * (fu - fd))
    return p_goal, e_goal + e_ruin, p_ruin


def _re12(rho) -> float:
    rho = density(rho)
    if rho.order != 2:
        raise ValueError("Hadamard walk needs an order-2 density")
    return rho.re12


def hadamard_ruin_stats(k: int, M: int, rho) -> tuple[float, float]:
    """``(p_reach, expected_time)`` from the generating-function route."""
    x = _re12(rho)
    p, e, _ = hadamard_ruin_affine(k, M)
    return p(x), e(x)


def hadamard_closed_form_affine(k: int, M: int) -> tuple[Affine, Affine]:
    _check_km(k, M)
    if M < 3:
        raise ValueError("closed form needs M >= 3")
    return Affine(Fraction(k, M), Fraction(2, M)), Affine(Fraction(k * (M - k)), Fraction(2 * M - 4 * k))


def hadamard_closed_form(k: int, M: int, rho) -> tuple[float, float]:
    """``p = k/M + (2/M) Re(rho_12)`` and ``E = k(M-k) + (2M-4k) Re(rho_12)``."""
    x = _re12(rho)
    p, e = hadamard_closed_form_affine(k, M)
    return p(x), e(x)


def truncated_value(gf: RationalGF, z: Fraction, terms: int) -> Fraction:
    """Partial sum of the series of ``gf`` at ``z`` using ``terms`` coefficients."""
    c = series_coeffs(gf, terms - 1)
    return sum((Fraction(a) * z**k for k, a in enumerate(c) if a), Fraction(0))


def tail_bound(gf: RationalGF, z: float, terms: int) -> float:
    """Geometric bound on the series tail past ``terms`` coefficients.

    Coefficients grow like ``r^k`` with ``r = 1 / (smallest root modulus of the
    denominator)``; the bound uses the last computed coefficient and ratio ``r z``.
    """
    roots = np.roots(list(reversed(gf.denominator.coeffs)))
    r = 1 / float(np.min(np.abs(roots)))
    q = r * z
    if q >= 1:
        return float("inf")
    c = series_coeffs(gf, terms + 1)
    last = max(abs(c[-1]), abs(c[-2]))
    return float(last * z ** (terms) * 2 / (1 - q * q)) if last else 0.0
