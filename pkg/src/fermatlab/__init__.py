"""Computational toolkit for Fermat numbers and heuristic Fermat-prime counts."""

__version__ = "0.1.0"

from .ntkernel import (  # noqa: E402
    DomainError,
    FactorizationError,
    PrimalityVerdict,
    ProthCandidate,
    ResourceError,
    factorize,
    lucas_lehmer,
    mod_pow,
    order_of_two,
    pepin_test,
    probable_prime,
    proth_test,
    residue_trace,
    sieve_primes,
)
