"""Fermat-number identities, the repeated-squaring factor search and the factor database."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
import threading
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from math import gcd
from pathlib import Path

import numpy as np

from .ntkernel import (
    DEFAULT_BIT_BUDGET,
    DomainError,
    ProthCandidate,
    check_bits,
    is_prime,
    order_of_two,
    probable_prime,
    proth_test,
    residue_trace,
)

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 1 << 16
DEFAULT_M_MAX = 64
SEARCH_METHOD = "proth-search"
SEED_METHOD = "published"

# Candidates sharing a factor with one of these are dropped before any modular work.
_WHEEL_PRIMES = tuple(p for p in range(3, 1000, 2) if all(p % d for d in range(3, math.isqrt(p) + 1, 2)))


@dataclass(frozen=True)
class FermatNumber:
    n: int
    bit_budget: int = DEFAULT_BIT_BUDGET

    @property
    def value(self) -> int:
        return fermat_number(self.n, bit_budget=self.bit_budget)


def fermat_number(n: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> int:
    if n < 0:
        raise DomainError(f"Fermat index must be >= 0, got {n}")
    check_bits((1 << n) + 1, bit_budget, f"F_{n}")
    return (1 << (1 << n)) + 1


def ferma_t_primes(e_max: int = 64) -> list[tuple[int, int]]:
    """Pairs (e, 2^e + 1) with 2^e + 1 prime for 0 <= e <= e_max, 2 included at e = 0."""
    return [(e, (1 << e) + 1) for e in range(e_max + 1) if is_prime((1 << e) + 1)]


def recurrence_check(n: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> bool:
    """F_0 F_1 ... F_n + 2 == F_{n+1}."""
    target = fermat_number(n + 1, bit_budget=bit_budget)
    prod = 1
    for i in range(n + 1):
        prod *= fermat_number(i, bit_budget=bit_budget)
    return prod + 2 == target


def pairwise_coprime_check(n_max: int, *, bit_budget: int = DEFAULT_BIT_BUDGET) -> bool:
    values = [fermat_number(i, bit_budget=bit_budget) for i in range(n_max + 1)]
    return all(gcd(values[i], values[j]) == 1 for j in range(len(values)) for i in range(j))


def fullness_check(p: int, n: int, strength: str = "lucas") -> bool:
    """Whether ``p`` is 1 modulo 2^(n+1) (``euler``) or 2^(n+2) (``lucas``)."""
    shift = {"euler": n + 1, "lucas": n + 2}.get(strength)
    if shift is None:
        raise DomainError(f"strength must be 'euler' or 'lucas', got {strength!r}")
    return p % (1 << shift) == 1


# -- records and the database ------------------------------------------------

@dataclass(frozen=True)
class FactorRecord:
    n: int
    k: int
    m: int
    p: int
    method: str = SEARCH_METHOD
    verified: bool = False
    timestamp: str | None = None

    def check(self) -> bool:
        """Re-derive every claim the record makes from scratch."""
        if self.k < 1 or self.k % 2 == 0 or self.p != (self.k << self.m) + 1:
            return False
        if not fullness_check(self.p, self.n, "lucas"):
            return False
        if not is_prime(self.p):
            return False
        return residue_trace(self.p, max_steps=self.n + 2).hit_index == self.n

    def verify(self) -> FactorRecord:
        return replace(self, verified=self.check())

    def to_json(self) -> str:
        d = asdict(self)
        d["p"] = str(self.p)
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> FactorRecord:
        d = json.loads(line)
        return cls(int(d["n"]), int(d["k"]), int(d["m"]), int(d["p"]), d["method"], bool(d["verified"]), d.get("timestamp"))


# (n, k, m) of published factors; every entry is re-verified before use.
PUBLISHED_FACTORS = (
    (5, 5, 7),
    (6, 1071, 8),
    (9, 37, 16),
    (10, 11131, 12),
    (11, 39, 13),
    (12, 7, 14),
    (36, 5, 39),
    (37, 1275438465, 39),
    (38, 2653, 40),
    (38, 3, 41),
    (39, 21, 41),
    (42, 43485, 45),
    (43, 212675402445, 45),
)


def published_seed() -> list[FactorRecord]:
    return [FactorRecord(n, k, m, (k << m) + 1, SEED_METHOD).verify() for n, k, m in PUBLISHED_FACTORS]


class DatabaseError(RuntimeError):
    """The database file is malformed or its checksum does not match."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


def _checksum(body: bytes) -> str:
    return "sha256:" + hashlib.sha256(body).hexdigest()


class FactorDatabase:
    """Append-only collection of factor records keyed by (n, p).

    On disk each record is one JSON object per line, followed by a final
    ``{"checksum":"sha256:..."}`` line covering every preceding byte.
    """

    def __init__(self, records=()):
        self._lock = threading.Lock()
        self._records: dict[tuple[int, int], FactorRecord] = {}
        for r in records:
            self.add(r)

    def add(self, record: FactorRecord) -> bool:
        """Insert ``record``; returns False when (n, p) is already present."""
        key = (record.n, record.p)
        with self._lock:
            if key in self._records:
                return False
            if record.timestamp is None:
                stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
                record = replace(record, timestamp=stamp)
            self._records[key] = record
            return True

    @property
    def records(self) -> tuple[FactorRecord, ...]:
        with self._lock:
            return tuple(self._records.values())

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key) -> bool:
        return key in self._records

    def dumps(self) -> bytes:
        body = "".join(r.to_json() + "\n" for r in self.records).encode()
        return body + json.dumps({"checksum": _checksum(body)}).encode() + b"\n"

    def save(self, path) -> None:
        path = Path(path)
        data = self.dumps()
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)

    def append(self, path, records) -> list[FactorRecord]:
        """Add ``records`` here and persist; returns the ones that were new."""
        added = [r for r in records if self.add(r)]
        self.save(path)
        return added

    @staticmethod
    def parse(data: bytes) -> tuple[list[FactorRecord], bool, int]:
        """Parse raw file bytes into (records, checksum_ok, checksum_offset).

        Malformed lines raise :class:`DatabaseError` carrying their offset.
        """
        if not data:
            return [], True, 0
        body_end = data.rstrip(b"\n").rfind(b"\n") + 1
        try:
            stored = json.loads(data[body_end:])["checksum"]
        except (ValueError, KeyError, TypeError):
            raise DatabaseError("missing or unreadable checksum line", body_end) from None
        ok = stored == _checksum(data[:body_end])
        records, offset = [], 0
        for line in data[:body_end].splitlines(keepends=True):
            try:
                records.append(FactorRecord.from_json(line.decode()))
            except (ValueError, KeyError, TypeError, UnicodeDecodeError):
                raise DatabaseError("malformed record", offset) from None
            offset += len(line)
        return records, ok, body_end

    @classmethod
    def load(cls, path, *, reverify: bool = True) -> FactorDatabase:
        path = Path(path)
        data = path.read_bytes() if path.exists() else b""
        records, ok, offset = cls.parse(data)
        if not ok:
            raise DatabaseError(f"checksum mismatch in {path}", offset)
        db = cls()
        for r in records:
            if reverify:
                checked = r.verify()
                if r.verified and not checked.verified:
                    log.warning("record n=%d p=%d failed re-verification; flagged", r.n, r.p)
                r = checked
            if not db.add(r):
                raise DatabaseError(f"duplicate record n={r.n} p={r.p}", 0)
        return db


@dataclass(frozen=True)
class RecordCheck:
    n: int
    p: int
    passed: bool
    hit_index: int | None


@dataclass(frozen=True)
class DatabaseVerification:
    path: str
    checksum_ok: bool
    checksum_offset: int
    records: tuple[RecordCheck, ...]

    @property
    def passed(self) -> bool:
        return self.checksum_ok and all(r.passed for r in self.records)


def verify_database(path) -> DatabaseVerification:
    """Check the file checksum and re-run the residue trace for every record."""
    path = Path(path)
    data = path.read_bytes() if path.exists() else b""
    records, ok, offset = FactorDatabase.parse(data)
    checks = []
    for r in records:
        trace = residue_trace(r.p, max_steps=r.n + 2) if r.p > 2 and r.p % 2 else None
        checks.append(RecordCheck(r.n, r.p, r.check(), trace.hit_index if trace else None))
    return DatabaseVerification(str(path), ok, offset, tuple(checks))


# -- the search ------------------------------------------------------------

def _search_exponent(m: int, n_lo: int, n_hi: int, k_max: int) -> list[FactorRecord]:
    top = min(n_hi, m - 2)
    if top < n_lo:
        return []
    ks = np.arange(1, k_max + 1, 2, dtype=np.int64)
    keep = np.ones(len(ks), dtype=bool)
    if (1 << m) + 1 > _WHEEL_PRIMES[-1]:
        for q in _WHEEL_PRIMES:
            # k * 2^m + 1 == 0 (mod q)  <=>  k == -(2^m)^-1 (mod q)
            bad = -pow(2, -m, q) % q
            keep &= ks % q != bad
    found = []
    start = 1 << n_lo
    for k in ks[keep].tolist():
        p = (k << m) + 1
        x = pow(2, start, p)
        for r in range(n_lo, top + 1):
            if x == p - 1:
                break
            x = x * x % p
        else:
            continue
        if k == 1 and m == 1 << r:
            continue  # p is F_r itself, not a proper factor
        verdict = proth_test(ProthCandidate(k, m))
        if verdict.status == "undetermined":
            verdict = probable_prime(p)
        if verdict.is_prime:
            found.append(FactorRecord(r, k, m, p, SEARCH_METHOD).verify())
    return found


def factor_search(n_lo: int, n_hi: int, k_max: int = DEFAULT_K_MAX, m_max: int = DEFAULT_M_MAX, *, workers: int = 1) -> list[FactorRecord]:
    """Find prime factors k*2^m + 1 of F_n for n in [n_lo, n_hi].

    Every odd k <= k_max and n_lo + 2 <= m <= m_max is considered.  A small
    wheel discards candidates with a factor below 1000, the survivors are
    squared repeatedly from 2^(2^n_lo), and only those reaching -1 get a
    Proth primality proof.  Output is ordered by (m, k) whatever ``workers`` is.
    """
    if n_lo > n_hi:
        raise DomainError(f"n_lo ({n_lo}) must not exceed n_hi ({n_hi})")
    if n_lo < 0 or k_max < 1 or m_max < 1:
        raise DomainError("indices and bounds must be nonnegative")
    exponents = list(range(n_lo + 2, m_max + 1))
    if workers > 1 and len(exponents) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_search_exponent, exponents, [n_lo] * len(exponents), [n_hi] * len(exponents), [k_max] * len(exponents)))
    else:
        chunks = [_search_exponent(m, n_lo, n_hi, k_max) for m in exponents]
    return sorted((r for chunk in chunks for r in chunk), key=lambda r: (r.m, r.k))


@dataclass(frozen=True)
class ListClassification:
    n_lo: int
    n_hi: int
    list_a: tuple[int, ...]
    list_b: tuple[int, ...]
    excluded: tuple[tuple[int, int], ...] = ()  # unverified (n, p) pairs ignored


def classify_lists(db: FactorDatabase, n_lo: int, n_hi: int) -> ListClassification:
    unverified = tuple((r.n, r.p) for r in db.records if not r.verified)
    if unverified:
        warnings.warn(f"ignoring unverified records: {list(unverified)}", stacklevel=2)
    known = {r.n for r in db.records if r.verified}
    rng = range(n_lo, n_hi + 1)
    return ListClassification(
        n_lo,
        n_hi,
        tuple(n for n in rng if n in known),
        tuple(n for n in rng if n not in known),
        unverified,
    )


@dataclass(frozen=True)
class DubnerKellerReport:
    k: int
    m_lo: int
    m_hi: int
    sample_size: int
    dividing: int
    fraction: float | None
    expected: float
    std_error: float | None
    z_score: float | None
    primes: tuple[tuple[int, int | None], ...] = field(default=())  # (m, n with p | F_n or None)


def dubner_keller_stat(k: int, m_lo: int, m_hi: int) -> DubnerKellerReport:
    """Fraction of primes k*2^m + 1, m in [m_lo, m_hi], that divide some Fermat number."""
    if k < 1 or k % 2 == 0:
        raise DomainError(f"k must be odd and positive, got {k}")
    primes = []
    for m in range(max(m_lo, 1), m_hi + 1):
        verdict = proth_test(ProthCandidate(k, m))
        if verdict.status == "undetermined":
            verdict = probable_prime((k << m) + 1)
        if verdict.is_prime:
            primes.append((m, order_of_two((k << m) + 1).fermat_index))
    expected = 1 / k
    size = len(primes)
    if not size:
        return DubnerKellerReport(k, m_lo, m_hi, 0, 0, None, expected, None, None)
    dividing = sum(n is not None for _, n in primes)
    fraction = dividing / size
    se = math.sqrt(expected * (1 - expected) / size)
    z = (fraction - expected) / se if se > 0 else 0.0
    return DubnerKellerReport(k, m_lo, m_hi, size, dividing, fraction, expected, se, z, tuple(primes))
