"""Multiprecision modular arithmetic, sieving, factoring and primality tests.

Python's ``int`` is the arbitrary-precision natural number used throughout;
every value is canonical by construction.  Operations that would build or
reduce modulo an operand larger than the configured bit budget raise
:class:`ResourceError` rather than silently truncating.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd, isqrt
from typing import Iterator

import numpy as np

DEFAULT_BIT_BUDGET = 1 << 20
TRIAL_BOUND = 1 << 20
RHO_ITERATIONS = 1 << 18
MR_ROUNDS = 40
# Miller-Rabin with the first 13 primes as bases is exact below this bound.
MR_DETERMINISTIC_LIMIT = 3_317_044_064_679_887_385_961_981
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)

PRIME = "prime"
COMPOSITE = "composite"
UNDETERMINED = "undetermined"


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(RuntimeError):
    """An operand exceeds the configured bit or effort budget."""


class FactorizationError(RuntimeError):
    """Factorization effort was exhausted for a value that had to be factored."""

    def __init__(self, n: int, cofactor: int):
        self.n = n
        self.cofactor = cofactor
        super().__init__(f"could not fully factor {n}; unfactored cofactor {cofactor}")


def check_bits(bits: int, bit_budget: int, what: str) -> None:
    if bits > bit_budget:
        raise ResourceError(f"{what} needs {bits} bits, exceeding the bit budget of {bit_budget}")


class Residue(int):
    """An integer reduced modulo ``modulus``; compares equal to its plain value."""

    modulus: int

    def __new__(cls, value: int, modulus: int):
        if modulus < 2:
            raise DomainError(f"modulus must be >= 2, got {modulus}")
        obj = super().__new__(cls, value % modulus)
        obj.modulus = modulus
        return obj

    @property
    def value(self) -> int:
        return int(self)

    def __repr__(self) -> str:
        return f"Residue({int(self)}, {self.modulus})"


@dataclass(frozen=True)
class ProthCandidate:
    k: int
    m: int

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise DomainError(f"k must be an odd positive integer, got {self.k}")
        if self.m < 1:
            raise DomainError(f"m must be positive, got {self.m}")

    def value(self) -> int:
        return (self.k << self.m) + 1


@dataclass(frozen=True)
class PrimalityVerdict:
    """Outcome of a primality test together with the evidence behind it.

    ``divisor`` is a proper divisor when one is known, ``base`` the witness or
    certifying base, and ``residue`` the final residue of a sequence test.
    """

    status: str
    test: str
    deterministic: bool = True
    divisor: int | None = None
    base: int | None = None
    residue: int | None = None

    @property
    def is_prime(self) -> bool:
        return self.status == PRIME

    @property
    def is_composite(self) -> bool:
        return self.status == COMPOSITE


@dataclass(frozen=True)
class ResidueTrace:
    """The values 2^(2^i) mod p for i = 0, 1, ... until a stopping condition.

    ``stop`` is ``"hit"`` (value p-1 reached, so p divides F_hit_index),
    ``"cycle"`` (a value repeated), ``"no-hit-possible"`` (the index passed
    v2(p-1) - 1, beyond which 2 cannot have order 2^(i+1)) or ``"max-steps"``.
    """

    p: int
    sequence: tuple[int, ...]
    hit_index: int | None
    stop: str


@dataclass(frozen=True)
class OrderOfTwo:
    p: int
    order: int
    power_of_two: bool
    fermat_index: int | None  # n with order == 2^(n+1), i.e. p | F_n


@dataclass(frozen=True)
class Factorization:
    n: int
    factors: dict[int, int] = field(default_factory=dict)
    cofactor: int = 1  # product of composite parts left unsplit

    @property
    def complete(self) -> bool:
        return self.cofactor == 1

    @property
    def primes(self) -> list[int]:
        """Prime factors with multiplicity, ascending."""
        return [p for p in sorted(self.factors) for _ in range(self.factors[p])]


def mod_pow(base: int, exponent: int, modulus: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> Residue:
    if modulus < 2:
        raise DomainError(f"modulus must be >= 2, got {modulus}")
    if exponent < 0:
        raise DomainError("exponent must be nonnegative")
    check_bits(modulus.bit_length(), bit_budget, "modulus")
    return Residue(pow(base, exponent, modulus), modulus)


# -- sieving ---------------------------------------------------------------

def _simple_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for i in range(3, isqrt(limit) + 1, 2):
        if flags[i]:
            flags[i * i :: 2 * i] = False
    return np.flatnonzero(flags).astype(np.int64)


@lru_cache(maxsize=8)
def _odd_base_primes(limit: int) -> tuple[int, ...]:
    return tuple(int(p) for p in _simple_sieve(limit)[1:])


def iter_prime_blocks(lo: int, hi: int, segment: int = 1 << 23) -> Iterator[np.ndarray]:
    """Yield ascending int64 arrays holding the primes of ``[lo, hi]``.

    Odd-only segmented sieve of Eratosthenes; each block covers ``segment``
    odd numbers, so memory stays bounded for any ``hi`` that fits int64.
    """
    lo = max(lo, 2)
    if hi < lo:
        return
    if lo == 2:
        yield np.array([2], dtype=np.int64)
        lo = 3
    if lo % 2 == 0:
        lo += 1
    base = _odd_base_primes(isqrt(hi))
    start = lo
    while start <= hi:
        count = min(segment, (hi - start) // 2 + 1)
        stop = start + 2 * count  # exclusive
        mask = np.ones(count, dtype=bool)
        for p in base:
            pp = p * p
            if pp >= stop:
                break
            first = max(pp, -(-start // p) * p)
            if first % 2 == 0:
                first += p
            if first < stop:
                mask[(first - start) // 2 :: p] = False
        if start == 1:
            mask[0] = False
        yield start + 2 * np.flatnonzero(mask).astype(np.int64)
        start = stop


def primes_in_range(lo: int, hi: int) -> np.ndarray:
    blocks = list(iter_prime_blocks(lo, hi))
    return np.concatenate(blocks) if blocks else np.empty(0, dtype=np.int64)


def sieve_primes(limit: int) -> list[int]:
    """All primes ``<= limit`` in ascending order (empty below 2)."""
    return primes_in_range(2, limit).tolist()


@lru_cache(maxsize=1)
def _trial_primes(bound: int) -> tuple[int, ...]:
    return tuple(sieve_primes(bound))


# -- primality -------------------------------------------------------------

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def _mr_round(n: int, d: int, s: int, a: int) -> bool:
    """True when ``a`` is not a Miller-Rabin witness for ``n``."""
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def probable_prime(n: int, rounds: int = MR_ROUNDS) -> PrimalityVerdict:
    """Miller-Rabin primality check.

    Below ``MR_DETERMINISTIC_LIMIT`` the fixed base set makes the answer
    exact.  Above it, ``rounds`` bases are drawn from a generator seeded by
    ``n`` so that repeated calls agree.  Composite verdicts always carry the
    witness base (or a small divisor).
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    for p in _SMALL_PRIMES:
        if n == p:
            return PrimalityVerdict(PRIME, "trial-division")
        if n % p == 0:
            return PrimalityVerdict(COMPOSITE, "trial-division", divisor=p)
    if n < _SMALL_PRIMES[-1] ** 2:
        return PrimalityVerdict(PRIME, "trial-division")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < MR_DETERMINISTIC_LIMIT:
        bases, deterministic = _MR_BASES, True
    else:
        rng = random.Random(n)
        bases, deterministic = [rng.randrange(2, n - 1) for _ in range(rounds)], False
    for a in bases:
        if not _mr_round(n, d, s, a):
            return PrimalityVerdict(COMPOSITE, "miller-rabin", base=a)
    return PrimalityVerdict(PRIME, "miller-rabin", deterministic=deterministic)


def is_prime(n: int) -> bool:
    return n >= 2 and probable_prime(n).is_prime


PROTH_BASES = tuple(_trial_primes(TRIAL_BOUND)[1:65])  # 3, 5, 7, ..., first 64 odd primes


def proth_test(c: ProthCandidate) -> PrimalityVerdict:
    """Proth's theorem: p = k*2^m + 1 with k < 2^m is prime iff a^((p-1)/2) = -1 for some a."""
    p = c.value()
    if c.k >= 1 << c.m:
        return probable_prime(p)
    half = (p - 1) >> 1
    for a in PROTH_BASES:
        if a % p == 0:
            continue
        r = pow(a, half, p)
        if r == p - 1:
            return PrimalityVerdict(PRIME, "proth", base=a, residue=r)
        if r != 1:
            # Euler's criterion fails: a prime modulus only allows +-1 here.
            return PrimalityVerdict(COMPOSITE, "proth", base=a, residue=r)
    return PrimalityVerdict(UNDETERMINED, "proth", deterministic=False)


def pepin_test(n: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> PrimalityVerdict:
    """F_n (n >= 1) is prime iff 3^((F_n - 1)/2) = -1 mod F_n."""
    if n < 1:
        raise DomainError("Pepin's test applies to F_n with n >= 1")
    check_bits((1 << n) + 1, bit_budget, f"F_{n}")
    f = (1 << (1 << n)) + 1
    r = pow(3, (f - 1) >> 1, f)
    status = PRIME if r == f - 1 else COMPOSITE
    return PrimalityVerdict(status, "pepin", base=3, residue=r)


def lucas_lehmer(p: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> PrimalityVerdict:
    """Lucas-Lehmer test of M_p = 2^p - 1 for an odd prime p."""
    if p < 3 or p % 2 == 0 or not is_prime(p):
        raise DomainError(f"Lucas-Lehmer needs an odd prime exponent, got {p}")
    check_bits(p, bit_budget, f"M_{p}")
    mp = (1 << p) - 1
    s = 4
    for _ in range(p - 2):
        s = s * s - 2
        s = (s & mp) + (s >> p)  # reduction mod 2^p - 1 by folding
        if s >= mp:
            s -= mp
    return PrimalityVerdict(PRIME if s == 0 else COMPOSITE, "lucas-lehmer", residue=s)


# -- factoring -------------------------------------------------------------

def _brent_rho(n: int, budget: int, rng: random.Random) -> int | None:
    """A nontrivial factor of composite ``n`` or None once ``budget`` iterations are spent."""
    if n % 2 == 0:
        return 2
    spent = 0
    while spent < budget:
        y, c, batch = rng.randrange(1, n), rng.randrange(1, n), 128
        g, r, q = 1, 1, 1
        x = ys = y
        while g == 1 and spent < budget:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(batch, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = gcd(q, n)
                k += batch
            spent += r
            r *= 2
        if g == n:
            # Batch overshot; walk back one step at a time.
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = gcd(abs(x - ys), n)
        if 1 < g < n:
            return g
    return None


def factorize(n: int, *, trial_bound: int = TRIAL_BOUND, rho_iterations: int = RHO_ITERATIONS) -> Factorization:
    """Trial division to ``trial_bound``, then Brent's rho seeded from ``n``.

    Composite parts that survive ``rho_iterations`` are returned multiplied
    together in ``cofactor``; the caller decides whether that is acceptable.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    factors: dict[int, int] = {}
    m = n
    for p in _trial_primes(trial_bound):
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            factors[p] = e
    if m == 1:
        return Factorization(n, dict(sorted(factors.items())))
    if m < trial_bound * trial_bound or is_prime(m):
        factors[m] = factors.get(m, 0) + 1
        return Factorization(n, dict(sorted(factors.items())))
    rng = random.Random(n)
    stack, cofactor = [m], 1
    while stack:
        c = stack.pop()
        if is_prime(c):
            factors[c] = factors.get(c, 0) + 1
            continue
        r = isqrt(c)
        if r * r == c:
            stack += [r, r]
            continue
        d = _brent_rho(c, rho_iterations, rng)
        if d is None:
            cofactor *= c
        else:
            stack += [d, c // d]
    return Factorization(n, dict(sorted(factors.items())), cofactor)


def _two_adic(n: int) -> int:
    return (n & -n).bit_length() - 1


def order_of_two(p: int) -> OrderOfTwo:
    """Multiplicative order of 2 modulo the odd prime ``p``."""
    if p < 3 or p % 2 == 0:
        raise DomainError(f"p must be an odd prime, got {p}")
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    fact = factorize(p - 1)
    if not fact.complete:
        raise FactorizationError(p - 1, fact.cofactor)
    order = p - 1
    for q in fact.factors:
        while order % q == 0 and pow(2, order // q, p) == 1:
            order //= q
    pow2 = order & (order - 1) == 0
    return OrderOfTwo(p, order, pow2, order.bit_length() - 2 if pow2 else None)


def residue_trace(p: int, max_steps: int = 1 << 16) -> ResidueTrace:
    """Square 2 repeatedly modulo ``p`` looking for -1."""
    if p < 3 or p % 2 == 0:
        raise DomainError(f"p must be an odd prime, got {p}")
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1")
    last_possible = _two_adic(p - 1) - 1
    seq: list[int] = []
    seen: set[int] = set()
    x = 2 % p
    for i in range(max_steps):
        if x in seen:
            return ResidueTrace(p, tuple(seq), None, "cycle")
        seq.append(x)
        seen.add(x)
        if x == p - 1:
            return ResidueTrace(p, tuple(seq), i, "hit")
        if i >= last_possible:
            return ResidueTrace(p, tuple(seq), None, "no-hit-possible")
        x = x * x % p
    return ResidueTrace(p, tuple(seq), None, "max-steps")


def euler_phi(n: int) -> int:
    fact = factorize(n)
    if not fact.complete:
        raise FactorizationError(n, fact.cofactor)
    result = n
    for p in fact.factors:
        result -= result // p
    return result

