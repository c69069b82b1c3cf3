"""Exact modular arithmetic: Kloosterman and Ramanujan sums, sieved
multiplicative tables, and the twisted Kloosterman average identity.

Notation: e(z) = exp(2*pi*i*z).  The Kloosterman sum is

    S(n, l; c) = sum_{d mod c, gcd(d,c)=1} e((d*l + dbar*n)/c),

with d*dbar == 1 (mod c).  Degenerate case n = 0 gives the Ramanujan sum
S(0, a; c) = sum_{d mod c, gcd(d,c)=1} e(a*d/c), which has the closed form
sum_{d | gcd(a,c)} d * mu(c/d).

Everything here is a pure function of its integer arguments.  Phases are
reduced to integers k mod c before exponentiation, so the only floating
error is in exp(2*pi*i*k/c) and the final pairwise summation.  A slower
oracle path groups equal phases into exact integer counts and evaluates
the root-of-unity combination in high precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np

__all__ = [
    "Residue",
    "ExactExponentialSum",
    "NotCoprimeError",
    "DivisibilityError",
    "mod_inverse",
    "kloosterman",
    "kloosterman_detail",
    "kloosterman_exact_phase",
    "kloosterman_factored",
    "ramanujan",
    "ramanujan_divisor_mu",
    "kloosterman_twist_identity_residual",
    "MultiplicativeTables",
    "multiplicative_tables",
    "factorize",
    "divisors",
    "mobius",
    "divisor_count",
    "triple_divisor",
]


class NotCoprimeError(ValueError):
    """Inverse requested for a residue that shares a factor with the modulus."""


class DivisibilityError(ValueError):
    """An argument combination violates a required exact-divisibility relation."""


@dataclass(frozen=True)
class Residue:
    """An integer reduced to the canonical range [0, modulus)."""

    value: int
    modulus: int

    def __post_init__(self) -> None:
        if self.modulus < 1:
            raise ValueError(f"modulus must be positive, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"residue {self.value} outside [0, {self.modulus})")


@dataclass(frozen=True)
class ExactExponentialSum:
    """A finished exponential sum together with how many unit phases went in.

    The triangle inequality |value| <= term_count is structural; tests lean
    on it as a cheap sanity bound.
    """

    value: complex
    term_count: int


def mod_inverse(d: int, c: int) -> Residue:
    """Inverse of d modulo c as a canonical residue.

    Raises NotCoprimeError unless gcd(d, c) = 1.
    """
    if c < 1:
        raise ValueError(f"modulus must be positive, got {c}")
    try:
        inv = pow(d, -1, c)
    except ValueError as exc:
        raise NotCoprimeError(f"{d} is not invertible mod {c}") from exc
    return Residue(inv, c)


@lru_cache(maxsize=4096)
def _unit_tables(c: int) -> tuple[np.ndarray, np.ndarray]:
    """Units mod c and their inverses, as parallel read-only int64 arrays.

    c = 1 yields the single residue 0, which is its own inverse; that
    convention makes every downstream sum collapse to one term of phase 0.
    """
    if c == 1:
        z = np.zeros(1, dtype=np.int64)
        z.setflags(write=False)
        return z, z
    d = np.arange(c, dtype=np.int64)
    units = d[np.gcd(d, c) == 1]
    inv = np.array([pow(int(u), -1, c) for u in units], dtype=np.int64)
    units.setflags(write=False)
    inv.setflags(write=False)
    return units, inv


def kloosterman(n: int, l: int, c: int) -> complex:
    """S(n, l; c) by direct enumeration over units mod c.

    Total in (n, l); c must be positive.  The result is real up to
    rounding (pairing d with its inverse conjugates each term), but the
    full complex value is returned so that the cancellation is visible.
    """
    units, inv = _unit_tables(c)
    phase = ((l % c) * units + (n % c) * inv) % c
    return complex(np.exp((2j * np.pi / c) * phase).sum())


def kloosterman_detail(n: int, l: int, c: int) -> ExactExponentialSum:
    """Same as kloosterman, carrying the number of summed unit phases."""
    units, _ = _unit_tables(c)
    return ExactExponentialSum(kloosterman(n, l, c), int(units.size))


def kloosterman_phase_counts(n: int, l: int, c: int) -> np.ndarray:
    """Exact integer histogram over phases: counts[k] = #{d : d*l + dbar*n == k mod c}.

    This is the sum S(n, l; c) before any floating evaluation; two sums with
    equal histograms are exactly equal.
    """
    units, inv = _unit_tables(c)
    phase = ((l % c) * units + (n % c) * inv) % c
    return np.bincount(phase, minlength=c)


def kloosterman_exact_phase(n: int, l: int, c: int, dps: int = 40) -> ExactExponentialSum:
    """Oracle route for S(n, l; c): exact phase counting, then a high-precision
    evaluation of the resulting combination of c-th roots of unity."""
    counts = kloosterman_phase_counts(n, l, c)
    units, _ = _unit_tables(c)
    with mp.workdps(dps):
        acc = mp.mpc(0)
        for k in np.flatnonzero(counts):
            acc += int(counts[k]) * mp.expjpi(mp.mpf(2 * int(k)) / c)
        value = complex(acc)
    return ExactExponentialSum(value, int(units.size))


def factorize(m: int) -> list[tuple[int, int]]:
    """Prime factorization of m >= 1 as (prime, exponent) pairs, trial division."""
    if m < 1:
        raise ValueError(f"factorize wants a positive integer, got {m}")
    out = []
    for p in (2, 3):
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
    p = 5
    step = 2  # alternate 5,7,11,13,... wheel over 6k+-1
    while p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
        p += step
        step = 6 - step
    if m > 1:
        out.append((m, 1))
    return out


def divisors(m: int) -> list[int]:
    """All positive divisors of m, ascending."""
    divs = [1]
    for p, e in factorize(m):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def mobius(m: int) -> int:
    fac = factorize(m)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def divisor_count(m: int) -> int:
    out = 1
    for _, e in factorize(m):
        out *= e + 1
    return out


def triple_divisor(m: int) -> int:
    """Number of ordered triples (a, b, c) with a*b*c = m."""
    out = 1
    for _, e in factorize(m):
        out *= (e + 1) * (e + 2) // 2
    return out


def kloosterman_factored(n: int, l: int, c: int) -> complex:
    """S(n, l; c) assembled from prime-power blocks by twisted multiplicativity:

        S(n, l; q*r) = S(n*rbar^2, l; q) * S(n*qbar^2, l; r),  gcd(q, r) = 1,

    applied across the full factorization.  Each block still runs the direct
    enumeration, so agreement with kloosterman() genuinely exercises the
    Chinese-remainder structure whenever c has two or more prime factors.
    """
    blocks = [p**e for p, e in factorize(c)] if c > 1 else [1]
    value = 1 + 0j
    for q in blocks:
        r = c // q
        rbar = pow(r, -1, q) if q > 1 else 0
        value *= kloosterman((n * rbar * rbar) % q, l, q)
    return value


def ramanujan(a: int, c: int) -> float:
    """Ramanujan sum S(0, a; c) = sum over units d of e(a*d/c); always an integer."""
    units, _ = _unit_tables(c)
    phase = ((a % c) * units) % c
    z = np.exp((2j * np.pi / c) * phase).sum()
    return float(z.real)


def ramanujan_divisor_mu(a: int, c: int) -> int:
    """Closed-form oracle: sum_{d | gcd(a, c)} d * mu(c/d).

    gcd(0, c) = c, so a = 0 correctly returns Euler phi of c.
    """
    g = math.gcd(a, c)
    return sum(d * mobius(c // d) for d in divisors(g))


def kloosterman_twist_identity_residual(l: int, n1: int, n2: int, m: int, c: int) -> float:
    """|LHS - RHS| of the twisted Kloosterman average identity.

    With M = m*c/n1 required to be a positive integer,

        LHS = sum_{d mod c, (d,c)=1} e(l*d/c) * S(m*d, n2; M)
        RHS = sum_{u mod M, (u,M)=1} S(0, l + u*n1; c) * e(n2*ubar/M).

    Opening S(m*d, n2; M) and executing the d-sum collapses the left side
    to Ramanujan sums against unit phases mod M, which is the right side.
    M = 1 degenerates both sides to the single Ramanujan sum S(0, l; c).
    """
    if c < 1 or m < 1:
        raise ValueError(f"need c >= 1 and m >= 1, got c={c}, m={m}")
    if n1 == 0 or (c * m) % n1 != 0 or (c * m) // n1 < 1:
        raise DivisibilityError(f"n1={n1} must exactly divide c*m={c * m} with positive quotient")
    M = (c * m) // n1

    d_units, _ = _unit_tables(c)
    residues = ((m % M) * d_units) % M
    inner = {int(r): kloosterman(int(r), n2, M) for r in np.unique(residues)}
    d_phases = np.exp((2j * np.pi / c) * (((l % c) * d_units) % c))
    lhs = sum(ph * inner[int(r)] for ph, r in zip(d_phases, residues))

    u_units, u_inv = _unit_tables(M)
    u_phases = np.exp((2j * np.pi / M) * (((n2 % M) * u_inv) % M))
    rhs = sum(ramanujan(int(l + int(u) * n1), c) * ph for u, ph in zip(u_units, u_phases))

    return abs(lhs - rhs)


@dataclass(frozen=True)
class MultiplicativeTables:
    """Read-only sieved tables of mu, the divisor count, and the triple-divisor
    count on [1, cap].  Index 0 is padding and never meaningful."""

    cap: int
    mu: np.ndarray
    tau: np.ndarray
    d3: np.ndarray

    def mu_of(self, m: int) -> int:
        return int(self.mu[m]) if m <= self.cap else mobius(m)

    def tau_of(self, m: int) -> int:
        return int(self.tau[m]) if m <= self.cap else divisor_count(m)

    def d3_of(self, m: int) -> int:
        return int(self.d3[m]) if m <= self.cap else triple_divisor(m)


def multiplicative_tables(N: int) -> MultiplicativeTables:
    """Sieve mu, tau = 1*1 and d3 = 1*1*1 (Dirichlet convolutions) on [1, N].

    The divisor-style sieves cost N log N slice additions; fine to a few
    million.  Past the table, the scalar factorization fallbacks take over.
    """
    if N < 1:
        raise ValueError(f"table cap must be >= 1, got {N}")

    mu = np.ones(N + 1, dtype=np.int8)
    sieve = np.ones(N + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, N + 1):
        if sieve[p]:
            if p * p <= N:
                sieve[p * p :: p] = False
            mu[p::p] *= -1
            if p * p <= N:
                mu[p * p :: p * p] = 0
    mu[0] = 0

    tau = np.zeros(N + 1, dtype=np.int32)
    for d in range(1, N + 1):
        tau[d::d] += 1
    tau[0] = 0

    d3 = np.zeros(N + 1, dtype=np.int64)
    for d in range(1, N + 1):
        d3[d::d] += tau[1 : N // d + 1]
    d3[0] = 0

    for arr in (mu, tau, d3):
        arr.setflags(write=False)
    return MultiplicativeTables(cap=N, mu=mu, tau=tau, d3=d3)
