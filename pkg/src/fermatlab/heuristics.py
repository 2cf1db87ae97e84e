"""Primality probability models for Fermat numbers and the expectation sums built from them.

Real-valued quantities are mpmath numbers at ``PRECISION_DPS`` significant
digits; the fullness-ratio model is exact rational arithmetic.  A model
value above 1 is clamped and the unclamped figure kept in ``raw``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .intervals import mertens_product
from .ntkernel import DomainError, euler_phi, is_prime, lucas_lehmer, probable_prime, sieve_primes

PRECISION_DPS = 60
MERTENS_CONSTANT = mpmath.mpf("0.26149721284764278375542683860869585905156664826120")
ONE_BILLIONTH = Fraction(1, 10**9)
FIRST_UNKNOWN_INDEX = 33


def _ctx():
    return mpmath.workdps(PRECISION_DPS)


def log_fermat(n: int) -> mpmath.mpf:
    """Natural log of F_n = 2^(2^n) + 1 without materialising F_n."""
    if n < 0:
        raise DomainError(f"Fermat index must be >= 0, got {n}")
    with _ctx():
        main = mpmath.ldexp(mpmath.log(2), n)
        if (1 << n) > 4 * PRECISION_DPS:
            return +main  # log1p(2^-2^n) is below working precision
        return main + mpmath.log1p(mpmath.ldexp(1, -(1 << n)))


@dataclass(frozen=True)
class ProbabilityEstimate:
    model: str
    n: int
    value: object  # mpf or Fraction, clamped to [0, 1]
    raw: object
    parameters: dict = field(default_factory=dict)

    @property
    def clamped(self) -> bool:
        return self.value != self.raw


def _clamp(x):
    return min(max(x, 0), 1)


def naive_prob(n: int) -> ProbabilityEstimate:
    """2 / log F_n: the density of primes among odd numbers of that size."""
    with _ctx():
        raw = 2 / log_fermat(n)
    return ProbabilityEstimate("naive", n, _clamp(raw), raw)


def sieve_adjusted_prob(n: int, B: int) -> ProbabilityEstimate:
    """Naive estimate conditioned on F_n having no prime divisor up to B.

    ``parameters`` carries both Mertens forms: ``closed_form`` =
    2 e^gamma log B / log F_n approximates this product exactly as written
    (p = 2 included), while ``odd_closed_form`` = e^gamma log B / log F_n
    is the version that drops the p = 2 factor already paid for by the 2 in
    the naive estimate.
    """
    if B < 2:
        raise DomainError(f"B must be >= 2, got {B}")
    mertens = mertens_product(B)
    with _ctx():
        L = log_fermat(n)
        raw = 2 / L * mpmath.mpf(mertens.product)
        odd_form = mpmath.e ** mpmath.euler * mpmath.log(B) / L
        params = {"B": B, "mertens_product": mertens.product, "closed_form": 2 * odd_form, "odd_closed_form": odd_form}
    return ProbabilityEstimate("sieve_adjusted", n, _clamp(raw), raw, params)


def fullness_ratio_prob(n: int, alpha: int = 2) -> ProbabilityEstimate:
    """phi(2^(n+2)) / phi(2^(alpha n)): share of primes 1 mod 2^(n+2) that are also 1 mod 2^(alpha n)."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    if alpha * n < n + 2:
        raise DomainError(f"alpha*n = {alpha * n} is below n+2 = {n + 2}; the ratio would exceed 1")
    K, q = 1 << (n + 2), 1 << (alpha * n)
    raw = Fraction(euler_phi(K), euler_phi(q))
    return ProbabilityEstimate("fullness_ratio", n, _clamp(raw), raw, {"alpha": alpha, "q": q, "K": K})


@dataclass(frozen=True)
class ExpectationReport:
    model: str
    n_lo: int
    n_hi: int
    partial_sum: object
    closed_form: object | None
    relative_error: object | None  # (closed_form - partial_sum) / closed_form
    comparison: str
    partial_sums: tuple = ()
    parameters: dict = field(default_factory=dict)


def _tail_terms() -> int:
    # 2^-n falls below 10^-(PRECISION_DPS + 5) after this many terms.
    return int((PRECISION_DPS + 5) * math.log2(10)) + 2


def hardy_wright_expectation(A: float = 1, n_lo: int = 0, n_hi: int | None = None) -> ExpectationReport:
    """A * sum 1/log F_n over [n_lo, n_hi] with the bounds (A/log 2) sum 2^-n and 3A.

    ``n_hi=None`` sums until the terms drop below working precision.
    """
    if A < 0:
        raise DomainError("A must be nonnegative")
    if n_hi is None:
        n_hi = n_lo + _tail_terms()
    with _ctx():
        A = mpmath.mpf(A)
        running, sums = mpmath.mpf(0), []
        for n in range(n_lo, n_hi + 1):
            running += A / log_fermat(n)
            sums.append(running)
        geometric = A / mpmath.log(2) * mpmath.ldexp(1, 1 - n_lo)
        below = running < geometric and running < 3 * A if A else running == 0
        rel = (geometric - running) / geometric if A else None
    comparison = f"partial sum {'<' if below else 'not <'} (A/log 2) sum 2^-n = {mpmath.nstr(geometric, 15)} and 3A = {3 * A}"
    return ExpectationReport("hardy_wright", n_lo, n_hi, running, geometric, rel, comparison, tuple(sums), {"A": A, "bound_3A": 3 * A})


def expected_new_fermat_primes(n_min: int = FIRST_UNKNOWN_INDEX, model: str = "fullness_ratio", terms: int = 64, alpha: int = 2) -> ExpectationReport:
    """Sum a model's probability over n >= n_min.

    For ``fullness_ratio`` the tail sum has the exact closed form
    4 * 2^((1-alpha) n_min) / (1 - 2^(1-alpha)), i.e. 4 / 2^(n_min - 1) at
    alpha = 2; ``terms`` partial-sum terms are checked against it.
    """
    if n_min < 2:
        raise DomainError(f"n_min must be >= 2, got {n_min}")
    n_hi = n_min + terms - 1
    if model == "fullness_ratio":
        if alpha < 2:
            raise DomainError("the closed form needs alpha >= 2")
        running, sums = Fraction(0), []
        for n in range(n_min, n_hi + 1):
            running += fullness_ratio_prob(n, alpha).raw
            sums.append(running)
        r = Fraction(1, 2 ** (alpha - 1))
        closed = 4 * r**n_min / (1 - r)
        flag = "< 1e-9" if closed < ONE_BILLIONTH else ">= 1e-9"
        comparison = f"closed form {closed} = {float(closed):.6g} {flag}"
        return ExpectationReport(model, n_min, n_hi, running, closed, (closed - running) / closed, comparison, tuple(sums), {"alpha": alpha})
    if model == "naive":
        with _ctx():
            running, sums = mpmath.mpf(0), []
            for n in range(n_min, n_hi + 1):
                running += naive_prob(n).raw
                sums.append(running)
            bound = 2 / mpmath.log(2) * mpmath.ldexp(1, 1 - n_min)
        flag = "< 1e-9" if running < mpmath.mpf("1e-9") else ">= 1e-9"
        comparison = f"partial sum {mpmath.nstr(running, 12)} {flag}; geometric bound {mpmath.nstr(bound, 12)}"
        return ExpectationReport(model, n_min, n_hi, running, None, None, comparison, tuple(sums))
    if model == "hardy_wright":
        return hardy_wright_expectation(1, n_min, n_hi)
    raise DomainError(f"unknown model {model!r}")


@dataclass(frozen=True)
class IntervalRequirement:
    delta: float
    epsilon: float
    log_x: object
    r_equidistribution: object  # (log x)^(1 + delta + eps)
    r_uniformity: object  # (log x)^(2 + delta + eps)
    selberg_threshold: object  # multiplier * (log x)^2
    selberg_satisfied: bool
    multiplier: float


def interval_requirement(x: int | None = None, delta: float = 2, epsilon: float = 0.1, multiplier: float = 100, *, log_x=None) -> IntervalRequirement:
    """Half-widths r demanded for equidistribution and for uniformity around ``x``.

    Pass ``log_x`` directly for scales such as F_33 that cannot be built.
    """
    if delta < 1:
        raise DomainError(f"delta must be >= 1, got {delta}")
    with _ctx():
        if log_x is None:
            if x is None or x < 3:
                raise DomainError("x must be >= 3")
            log_x = mpmath.log(mpmath.mpf(x))
        L = mpmath.mpf(log_x)
        r_eq = L ** (1 + mpmath.mpf(delta) + epsilon)
        r_un = L ** (2 + mpmath.mpf(delta) + epsilon)
        selberg = multiplier * L**2
    return IntervalRequirement(delta, epsilon, L, r_eq, r_un, selberg, bool(r_un > selberg), multiplier)


@dataclass(frozen=True)
class HarmonicReport:
    X: int
    partial_sum: object
    reference: object  # log log X + Mertens constant
    relative_difference: object


def mersenne_harmonic(X: int) -> HarmonicReport:
    """Sum of 1/p over primes p <= X, against log log X + M."""
    if X < 2:
        raise DomainError(f"X must be >= 2, got {X}")
    with _ctx():
        total = mpmath.fsum(mpmath.mpf(1) / p for p in sieve_primes(X))
        ref = mpmath.log(mpmath.log(X)) + MERTENS_CONSTANT
        return HarmonicReport(X, total, ref, (total - ref) / ref)


@dataclass(frozen=True)
class MersenneCensusReport:
    a: int
    b: int
    X: int
    census: tuple[int, ...]
    excluded: tuple[int, ...]  # primes dividing b
    count: int
    selberg_shape: float  # X / log^2 X
    count_ratio: float
    partial_sum: object  # sum of 1/(ap + b) over the census
    verdicts: tuple[tuple[int, str], ...]  # (p, status of M_p) for census p <= ll_limit
    mersenne_primes: tuple[int, ...]
    note: str = "the CRT residue-counting step behind the 1/(ap+b) bound is not modelled"


def special_mersenne_expectation(a: int, b: int, X: int, ll_limit: int = 2000) -> MersenneCensusReport:
    """Census of primes p <= X with ap + b prime, its 1/(ap+b) sum and M_p verdicts.

    Primes dividing b are left out and listed in ``excluded``.
    """
    if a == 0:
        raise DomainError("a = 0 makes ap + b constant")
    if X < 2:
        raise DomainError(f"X must be >= 2, got {X}")
    census, excluded = [], []
    for p in sieve_primes(X):
        if b % p == 0:
            excluded.append(p)
            continue
        v = a * p + b
        if v >= 2 and is_prime(v):
            census.append(p)
    with _ctx():
        psum = mpmath.fsum(mpmath.mpf(1) / (a * p + b) for p in census)
    verdicts = []
    for p in census:
        if p > ll_limit:
            break
        status = probable_prime(3).status if p == 2 else lucas_lehmer(p).status
        verdicts.append((p, status))
    shape = X / math.log(X) ** 2
    return MersenneCensusReport(
        a, b, X, tuple(census), tuple(excluded), len(census), shape, len(census) / shape,
        psum, tuple(verdicts), tuple(p for p, s in verdicts if s == "prime"),
    )
