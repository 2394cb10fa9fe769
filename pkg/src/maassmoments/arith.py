"""Exact integer and multiplicative arithmetic.

Moebius/divisor functions, the generalised divisor function
d_s(n) = sum_{n=ab} (a/b)^s, Kloosterman sums with exact modular inverses,
Hecke-relation expansions, and the bilinear mollifier cross-terms.

Everything here is exact (integers/Fractions) or float with compensated
summation; there are no truncations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Tuple

__all__ = [
    "Factorization", "factorize", "moebius", "divisor_d", "divisor_list",
    "divisor_ds", "kloosterman", "hecke_expand", "mollifier_cross",
    "dit_ramanujan_check", "primes_up_to",
]

_MAX_N = 2 ** 63 - 1


@dataclass(frozen=True)
class Factorization:
    n: int
    primes: Tuple[Tuple[int, int], ...]  # (p, exponent), p strictly increasing

    def __post_init__(self):
        prod = 1
        last = 1
        for p, e in self.primes:
            if p <= last:
                raise ValueError("primes must be strictly increasing")
            last = p
            prod *= p ** e
        if prod != self.n:
            raise ValueError(f"factorization does not reconstruct {self.n}")


@lru_cache(maxsize=100000)
def factorize(n: int) -> Factorization:
    """Trial-division factorization, n in [1, 2^63 - 1]."""
    if not 1 <= n <= _MAX_N:
        raise ValueError(f"n = {n} outside [1, {_MAX_N}]")
    m = n
    out = []
    for p in (2, 3):
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        if e:
            out.append((p, e))
    p = 5
    step = 2
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        if e:
            out.append((p, e))
        p += step
        step = 6 - step  # 5, 7, 11, 13, ... wheel
    if m > 1:
        out.append((m, 1))
    return Factorization(n=n, primes=tuple(out))


def moebius(n: int) -> int:
    f = factorize(n)
    if any(e > 1 for _, e in f.primes):
        return 0
    return -1 if len(f.primes) % 2 else 1


def divisor_d(n: int) -> int:
    f = factorize(n)
    out = 1
    for _, e in f.primes:
        out *= e + 1
    return out


def divisor_list(n: int) -> List[int]:
    """All divisors of n, sorted."""
    divs = [1]
    for p, e in factorize(n).primes:
        divs = [d * p ** k for d in divs for k in range(e + 1)]
    return sorted(divs)


def divisor_ds(s: complex, n: int) -> complex:
    """d_s(n) = sum_{n=ab} (a/b)^s; satisfies d_s = d_{-s}.

    Real-valued for purely imaginary s (terms pair into cosines).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = complex(s)
    acc = 0j
    for a in divisor_list(n):
        b = n // a
        lr = math.log(a) - math.log(b)
        acc += complex(math.cos(s.imag * lr), math.sin(s.imag * lr)) * math.exp(s.real * lr)
    return acc


def primes_up_to(n: int) -> List[int]:
    """Simple sieve."""
    if n < 2:
        return []
    sieve = bytearray(b"\x01") * (n + 1)
    sieve[:2] = b"\x00\x00"
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            start = p * p
            sieve[start::p] = b"\x00" * ((n - start) // p + 1)
    return [i for i, v in enumerate(sieve) if v]


def kloosterman(m: int, n: int, c: int) -> float:
    """Exact Kloosterman sum S(m, n; c) = sum_{x mod c, (x,c)=1} e((mx + n xbar)/c).

    Modular inverses are exact; the cosine accumulation is compensated
    (math.fsum).  S(m, n; 1) = 1 by the empty-modulus convention.  The Weil
    bound |S| <= d(c) sqrt(gcd(m,n,c)) sqrt(c) is asserted on every call.
    """
    if c < 1:
        raise ValueError("modulus must be >= 1")
    if c > 10 ** 7:
        raise OverflowError(f"modulus {c} above the supported range 1e7")
    if c == 1:
        return 1.0
    two_pi_over_c = 2.0 * math.pi / c
    mm = m % c
    nn = n % c
    terms = []
    for x in range(1, c):
        if math.gcd(x, c) != 1:
            continue
        xbar = pow(x, -1, c)
        terms.append(math.cos(two_pi_over_c * ((mm * x + nn * xbar) % c)))
    val = math.fsum(terms)
    # Weil envelope: d(c) * sqrt(gcd(m, n, c)) * sqrt(c)
    g = math.gcd(m, n, c)
    if g == 0:
        g = c
    bound = divisor_d(c) * math.sqrt(g) * math.sqrt(c)
    if abs(val) > bound + 1e-6 * c:
        raise AssertionError(
            f"Weil bound violated: |S({m},{n};{c})| = {abs(val):.6f} > {bound:.6f}")
    return val


def hecke_expand(m: int, n: int) -> List[Tuple[int, int]]:
    """lambda(m) lambda(n) = sum over d | (m, n) of lambda(m n / d^2).

    Returns the exact list of (l, multiplicity); the l are pairwise distinct,
    so every multiplicity is 1 and the count equals d(gcd(m, n)).
    """
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    g = math.gcd(m, n)
    return [(m * n // (d * d), 1) for d in divisor_list(g)]


def mollifier_cross(r: int, n: int, a: Callable[[int], float]) -> float:
    """Bilinear cross-term sum over ordered factorizations n = n1 * n2:

        A_{r,n} = sum a(r n1) mu(r n1) a(r n2) mu(r n2).
    """
    if r < 1 or n < 1:
        raise ValueError("r, n must be >= 1")
    terms = []
    for n1 in divisor_list(n):
        n2 = n // n1
        m1 = moebius(r * n1)
        if m1 == 0:
            continue
        m2 = moebius(r * n2)
        if m2 == 0:
            continue
        terms.append(a(r * n1) * m1 * a(r * n2) * m2)
    return math.fsum(terms)


def dit_ramanujan_check(m: int, n: int, t: float) -> float:
    """Residual of d_it(m) d_it(n) = sum_{d | (m,n)} d_it(m n / d^2).

    Returns |LHS - RHS|; exact arithmetic would give 0.
    """
    if not (1 <= m <= 10 ** 6 and 1 <= n <= 10 ** 6):
        raise ValueError("m, n must lie in [1, 1e6]")
    s = 1j * t
    lhs = divisor_ds(s, m) * divisor_ds(s, n)
    rhs = 0j
    for d in divisor_list(math.gcd(m, n)):
        rhs += divisor_ds(s, m * n // (d * d))
    return abs(lhs - rhs)
