"""Prime and K-full counts in short intervals, progressions and the balls-in-cups model.

Every count here comes from a segmented sieve, so results are exact up to
the sieve budget.  Randomised experiments draw from numpy's PCG64 through
``SeedSequence.spawn`` and are bit-reproducible for a given seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from .ntkernel import (
    DomainError,
    FactorizationError,
    ResourceError,
    euler_phi,
    factorize,
    iter_prime_blocks,
    primes_in_range,
)

SIEVE_BUDGET = 10**10
DEFAULT_TOLERANCE = 0.25
DEFAULT_MULTIPLIER = 100.0
RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class IntervalSpec:
    """The closed window [x - r, x + r]."""

    x: int
    r: int

    def __post_init__(self):
        if not 0 <= self.r < self.x:
            raise DomainError(f"need 0 <= r < x, got x={self.x}, r={self.r}")

    @property
    def lo(self) -> int:
        return self.x - self.r

    @property
    def hi(self) -> int:
        return self.x + self.r


@dataclass(frozen=True)
class CongruenceClass:
    q: int
    a: int

    def __post_init__(self):
        if self.q < 1 or not 0 <= self.a < self.q:
            raise DomainError(f"need q >= 1 and 0 <= a < q, got q={self.q}, a={self.a}")


def _bounds(interval) -> tuple[int, int]:
    lo, hi = (interval.lo, interval.hi) if isinstance(interval, IntervalSpec) else interval
    if hi > SIEVE_BUDGET:
        raise ResourceError(f"interval end {hi} exceeds the sieve budget of {SIEVE_BUDGET}")
    return lo, hi


def count_primes(interval) -> int:
    """Number of primes in an :class:`IntervalSpec` or an inclusive ``(lo, hi)`` pair."""
    lo, hi = _bounds(interval)
    return sum(len(b) for b in iter_prime_blocks(lo, hi))


def count_primes_in_class(interval, c: CongruenceClass) -> int:
    lo, hi = _bounds(interval)
    return sum(int(np.count_nonzero(b % c.q == c.a)) for b in iter_prime_blocks(lo, hi))


def is_k_full(n: int, K: int) -> bool:
    """True when every prime divisor of ``n`` is 1 mod ``K`` (so 1 is K-full)."""
    if n < 1 or K < 1:
        raise DomainError(f"need n >= 1 and K >= 1, got n={n}, K={K}")
    fact = factorize(n)
    if not fact.complete:
        raise FactorizationError(n, fact.cofactor)
    return all(p % K == 1 % K for p in fact.factors)


def k_full_mask(lo: int, hi: int, K: int) -> np.ndarray:
    """Boolean array over [lo, hi]; entry i says whether lo + i is K-full.

    Works by striking out every multiple of a prime that is not 1 mod K.
    """
    if lo < 1:
        raise DomainError("K-fullness is defined for positive integers")
    width = hi - lo + 1
    bad = np.zeros(max(width, 0), dtype=bool)
    for block in iter_prime_blocks(2, hi):
        block = block[block % K != 1 % K]
        small = block[block <= width]
        for p in small.tolist():
            bad[-lo % p :: p] = True
        large = block[block > width]
        # At most one multiple of p falls in the window.
        first = -(-lo // large) * large
        first = first[first <= hi]
        bad[first - lo] = True
    return ~bad


def count_k_full(interval, K: int) -> int:
    lo, hi = _bounds(interval)
    return int(np.count_nonzero(k_full_mask(lo, hi, K)))


@dataclass(frozen=True)
class DensityReport:
    x: int
    r: int
    K: int
    count_k_full: int
    count_primes_1_mod_K: int
    ratio: Fraction | None  # None when no prime is 1 mod K in the window


def density_report(interval: IntervalSpec, K: int) -> DensityReport:
    kfull = count_k_full(interval, K)
    primes = count_primes_in_class(interval, CongruenceClass(K, 1 % K))
    ratio = Fraction(kfull, primes) if primes else None
    return DensityReport(interval.x, interval.r, K, kfull, primes, ratio)


def kfull_ratio_experiment(x: int, K: int, r_schedule) -> list[DensityReport]:
    """K-full count over count of primes 1 mod K, for each half-width in ``r_schedule``."""
    if K < math.log(math.log(x)):
        raise DomainError(f"K={K} is below log log x = {math.log(math.log(x)):.3f}")
    return [density_report(IntervalSpec(x, int(r)), K) for r in r_schedule]


@dataclass(frozen=True)
class MertensReport:
    B: int
    product: float
    reference: float  # e^gamma * log B
    ratio: float


def mertens_product(B: int) -> MertensReport:
    """prod_{p <= B} (1 - 1/p)^-1 compared with e^gamma log B."""
    if B < 2:
        raise DomainError(f"B must be >= 2, got {B}")
    if B > SIEVE_BUDGET:
        raise ResourceError(f"B={B} exceeds the sieve budget of {SIEVE_BUDGET}")
    parts = [float(-np.sum(np.log1p(-1.0 / block))) for block in iter_prime_blocks(2, B)]
    product = math.exp(math.fsum(parts))
    reference = math.exp(EULER_GAMMA) * math.log(B)
    return MertensReport(B, product, reference, product / reference)


@dataclass(frozen=True)
class SelbergReport:
    x: int
    y: int
    samples: int
    seed: int
    epsilon: float
    multiplier: float
    threshold: float  # multiplier * log^2 x
    meets_condition: bool
    pass_fraction: float
    mean_ratio: float  # average of count / (y / log t)
    rng: str = RNG_ALGORITHM


def selberg_window_check(x: int, y: int, samples: int = 200, seed: int = 0, epsilon: float = DEFAULT_TOLERANCE, multiplier: float = DEFAULT_MULTIPLIER) -> SelbergReport:
    """Sample windows (t, t + y] with t uniform in [x, 2x) and compare their prime counts with y / log t.

    When ``y >= x`` the single window [2, x] is checked against x / log x.
    """
    if x < 3 or y < 1:
        raise DomainError("need x >= 3 and y >= 1")
    threshold = multiplier * math.log(x) ** 2
    if y >= x:
        count = count_primes((2, x))
        expected = x / math.log(x)
        ok = abs(count - expected) <= epsilon * expected
        return SelbergReport(x, y, 1, seed, epsilon, multiplier, threshold, y > threshold, float(ok), count / expected)
    if 2 * x + y > SIEVE_BUDGET:
        raise ResourceError(f"windows up to {2 * x + y} exceed the sieve budget of {SIEVE_BUDGET}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    starts = rng.integers(x, 2 * x, size=samples)
    passed, ratios = 0, []
    for t in starts.tolist():
        count = count_primes((t + 1, t + y))
        expected = y / math.log(t)
        ratios.append(count / expected)
        passed += abs(count - expected) <= epsilon * expected
    return SelbergReport(x, y, samples, seed, epsilon, multiplier, threshold, y > threshold, passed / samples, math.fsum(ratios) / samples)


def _von_mangoldt_table(n_max: int) -> np.ndarray:
    lam = np.zeros(n_max + 1)
    primes = primes_in_range(2, n_max)
    logs = np.log(primes.astype(np.float64))
    pk = primes.copy()
    alive = np.ones(len(primes), dtype=bool)
    while alive.any():
        lam[pk[alive]] = logs[alive]
        with np.errstate(over="ignore"):
            nxt = pk * primes
        alive &= (pk <= n_max // primes)
        pk = np.where(alive, nxt, pk)
    return lam


def chebyshev_psi(y: float, c: CongruenceClass = CongruenceClass(1, 0)) -> float:
    """Sum of the von Mangoldt function over n <= y with n = a mod q."""
    n_max = int(math.floor(y))
    if n_max < 2:
        return 0.0
    if n_max > SIEVE_BUDGET:
        raise ResourceError(f"y={y} exceeds the sieve budget of {SIEVE_BUDGET}")
    lam = _von_mangoldt_table(n_max)
    return math.fsum(lam[c.a % c.q :: c.q].tolist()) if c.q > 1 else math.fsum(lam.tolist())


@dataclass(frozen=True)
class SecondMomentReport:
    x: int
    h: float
    q: int
    step: float
    value: float
    normaliser: float  # h x log^2(qx)
    bound_ratio: float
    per_class: dict[int, float]
    failure_fraction: dict[int, float]  # share of sampled y violating the tolerance
    exceptional_classes: tuple[int, ...]
    exceptional_bound: float  # phi(q)^2 log^2 x / h
    gy_lower_bound: float  # 1/2 x h log(xq / h^3), summed over classes
    tolerance: float
    exceptional_share: float


def second_moment(x: int, h: float, q: int = 1, step: float | None = None, tolerance: float = 0.5, exceptional_share: float = 0.1) -> SecondMomentReport:
    """Integrate (psi(y+h; q, a) - psi(y; q, a) - h/phi(q))^2 over y in [x, 2x].

    The integral is a midpoint Riemann sum with the given ``step`` (default
    max(1, h/100)); psi is a step function with jumps at integers, so a unit
    step starting at an integer ``x`` is exact.  A class is exceptional when
    the increment misses h/phi(q) by more than ``tolerance`` (relative) at
    more than ``exceptional_share`` of the sample points.
    """
    if x < 2 or q < 1 or h < 0:
        raise DomainError("need x >= 2, q >= 1 and h >= 0")
    phi = euler_phi(q)
    classes = [a for a in range(q) if gcd(a, q) == 1]
    normaliser = h * x * math.log(q * x) ** 2
    exc_bound = phi**2 * math.log(x) ** 2 / h if h else math.inf
    gy = 0.5 * x * h * math.log(x * q / h**3) if h else 0.0
    if h == 0:
        zeros = dict.fromkeys(classes, 0.0)
        return SecondMomentReport(x, h, q, 0.0, 0.0, normaliser, 0.0, zeros, zeros, (), exc_bound, gy, tolerance, exceptional_share)
    step = max(1.0, h / 100) if step is None else float(step)
    if step > h:
        raise DomainError(f"integration step {step} is larger than h={h}")
    n_max = int(math.floor(2 * x + h))
    if n_max > SIEVE_BUDGET:
        raise ResourceError(f"2x + h = {n_max} exceeds the sieve budget of {SIEVE_BUDGET}")
    n_steps = max(1, round(x / step))
    width = x / n_steps
    ys = x + (np.arange(n_steps) + 0.5) * width
    lo_idx = np.floor(ys).astype(np.int64)
    hi_idx = np.floor(ys + h).astype(np.int64)
    lam = _von_mangoldt_table(n_max)
    idx = np.arange(n_max + 1)
    mean = h / phi
    per_class, failure = {}, {}
    for a in classes:
        cum = np.cumsum(np.where(idx % q == a, lam, 0.0))
        dev = cum[hi_idx] - cum[lo_idx] - mean
        per_class[a] = float(np.sum(dev * dev) * width)
        failure[a] = float(np.mean(np.abs(dev) > tolerance * mean))
    value = math.fsum(per_class.values())
    exceptional = tuple(a for a in classes if failure[a] > exceptional_share)
    return SecondMomentReport(x, h, q, width, value, normaliser, value / normaliser, per_class, failure, exceptional, exc_bound, gy, tolerance, exceptional_share)


@dataclass(frozen=True)
class BallsCupsReport:
    B: int
    C: int
    trials: int
    seed: int
    epsilon: float
    max_relative_deviation: tuple[float, ...]
    min_relative_deviation: tuple[float, ...]
    pass_fraction: float
    meets_condition: bool  # B > multiplier * C log C
    multiplier: float
    rng: str = RNG_ALGORITHM


def balls_in_cups(B: int, C: int, trials: int = 1000, seed: int = 0, epsilon: float = 0.5, multiplier: float = 10.0) -> BallsCupsReport:
    """Throw ``B`` balls uniformly into ``C`` cups, ``trials`` times.

    A trial passes when every cup holds between (1-eps)B/C and (1+eps)B/C
    balls.  Trial i draws from the i-th child of ``SeedSequence(seed)``.
    """
    if B < 0 or C < 1 or trials < 1:
        raise DomainError("need B >= 0, C >= 1 and trials >= 1")
    mean = B / C
    lo, hi = (1 - epsilon) * mean, (1 + epsilon) * mean
    highs, lows, passed = [], [], 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.Generator(np.random.PCG64(child))
        loads = np.bincount(rng.integers(0, C, size=B), minlength=C)
        top, bottom = int(loads.max()), int(loads.min())
        highs.append((top - mean) / mean if mean else 0.0)
        lows.append((bottom - mean) / mean if mean else 0.0)
        passed += lo <= bottom and top <= hi
    meets = B > multiplier * C * math.log(C)
    return BallsCupsReport(B, C, trials, seed, epsilon, tuple(highs), tuple(lows), passed / trials, meets, multiplier)
