"""Command-line front end: one subcommand per experiment.

Exit status is 0 on success, 1 for usage or domain errors, 2 when an
operand exceeds the bit/effort/sieve budget and 3 when a verification
fails.  Output is byte-identical for identical arguments.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import __version__
from . import fermat, heuristics, intervals, ntkernel
from .ntkernel import DomainError, FactorizationError, ResourceError
from .reports import render_csv, render_text

log = logging.getLogger("fermatlab")

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_VERIFY = 0, 1, 2, 3
ENV_BIT_BUDGET = "FERMATLAB_BIT_BUDGET"
ENV_DB = "FERMATLAB_DB"
_COMMON = {"format", "output", "seed", "bit_budget", "effort_budget", "db", "workers", "verbose", "command", "db_command", "func"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    format: str = "text"
    seed: int | None = None
    bit_budget: int = ntkernel.DEFAULT_BIT_BUDGET
    effort_budget: int = ntkernel.RHO_ITERATIONS
    db: str | None = None
    workers: int = 1


@dataclass
class RunReport:
    config: RunConfig
    results: list
    wall_time: float = 0.0
    versions: dict = field(default_factory=dict)
    failed: bool = False  # a verification did not pass

    def header(self) -> dict:
        return {**dataclasses.asdict(self.config), "versions": self.versions}

    def render(self) -> str:
        fn = render_csv if self.config.format == "csv" else render_text
        return fn(self.header(), self.results)


def _versions() -> dict:
    return {"fermatlab": __version__, "numpy": np.__version__, "mpmath": mpmath.__version__}


def _residue64(r: int | None) -> str | None:
    return None if r is None else f"{r & (2**64 - 1):016x}"


def _verdict(v: ntkernel.PrimalityVerdict, **extra) -> dict:
    d = {"kind": "PrimalityVerdict", **extra, "status": v.status, "test": v.test, "deterministic": v.deterministic}
    if v.divisor is not None:
        d["divisor"] = v.divisor
    if v.base is not None:
        d["base"] = v.base
    if v.residue is not None:
        d["residue64"] = _residue64(v.residue)
    return d


# -- handlers ----------------------------------------------------------------

def cmd_pepin(a, cfg):
    if a.ferma_t:
        value = (1 << a.n) + 1
        ntkernel.check_bits(value.bit_length(), cfg.bit_budget, f"2^{a.n}+1")
        if a.n >= 1 and a.n & (a.n - 1) == 0:
            v = ntkernel.pepin_test(a.n.bit_length() - 1, bit_budget=cfg.bit_budget)
        else:
            v = ntkernel.probable_prime(value)
        return [_verdict(v, convention="ferma-t", e=a.n)]
    return [_verdict(ntkernel.pepin_test(a.n, bit_budget=cfg.bit_budget), n=a.n)]


def cmd_lucas_lehmer(a, cfg):
    return [_verdict(ntkernel.lucas_lehmer(a.p, bit_budget=cfg.bit_budget), p=a.p)]


def cmd_trace(a, cfg):
    t = ntkernel.residue_trace(a.p, a.max_steps)
    return [t]


def cmd_factorize(a, cfg):
    f = ntkernel.factorize(a.value, rho_iterations=cfg.effort_budget)
    return [{"kind": "Factorization", "n": f.n, "primes": f.primes, "cofactor": f.cofactor, "complete": f.complete}]


def _load_db(cfg):
    return fermat.FactorDatabase.load(cfg.db) if cfg.db and os.path.exists(cfg.db) else fermat.FactorDatabase()


def cmd_factor_search(a, cfg):
    n_lo = a.n if a.n is not None else a.n_lo
    n_hi = a.n if a.n is not None else a.n_hi
    if n_lo is None or n_hi is None:
        raise UsageError("give --n or both --n-lo and --n-hi")
    found = fermat.factor_search(n_lo, n_hi, a.k_max, a.m_max, workers=cfg.workers)
    if cfg.db:
        db = _load_db(cfg)
        db.append(cfg.db, found)
    traces = {r.p: ntkernel.residue_trace(r.p, r.n + 2).hit_index for r in found}
    return [{"kind": "FactorRecord", "n": r.n, "k": r.k, "m": r.m, "p": r.p, "method": r.method, "verified": r.verified, "hit_index": traces[r.p]} for r in found]


def cmd_classify(a, cfg):
    db = _load_db(cfg)
    if a.seed_published:
        for r in fermat.published_seed():
            db.add(r)
    return [fermat.classify_lists(db, a.n_lo, a.n_hi)]


def cmd_dubner_keller(a, cfg):
    return [fermat.dubner_keller_stat(k, a.m_lo, a.m_hi) for k in a.k]


def cmd_identities(a, cfg):
    out = []
    for n in range(a.n_max + 1):
        out.append({"kind": "FermatIdentity", "n": n, "recurrence": fermat.recurrence_check(n, bit_budget=cfg.bit_budget)})
    out.append({"kind": "Coprimality", "n_max": a.n_max, "pairwise_coprime": fermat.pairwise_coprime_check(a.n_max, bit_budget=cfg.bit_budget)})
    return out


def cmd_kfull_ratio(a, cfg):
    schedule = a.r or [10**6, 10**5, 10**4, int(math.log(a.x) ** 3)]
    return intervals.kfull_ratio_experiment(a.x, a.K, schedule)


def cmd_mertens(a, cfg):
    return [intervals.mertens_product(B) for B in a.B]


def cmd_selberg_window(a, cfg):
    y = a.y if a.y is not None else int(math.log(a.x) ** 2 * a.multiplier)
    return [intervals.selberg_window_check(a.x, y, a.samples, cfg.seed or 0, a.epsilon, a.multiplier)]


def cmd_second_moment(a, cfg):
    return [intervals.second_moment(a.x, a.h, a.q, a.step, a.tolerance, a.share)]


def cmd_balls_cups(a, cfg):
    B = a.B if a.B is not None else math.ceil(10 * a.C * math.log(a.C))
    return [intervals.balls_in_cups(B, a.C, a.trials, cfg.seed or 0, a.epsilon, a.multiplier)]


def cmd_prob(a, cfg):
    if a.model == "naive":
        return [heuristics.naive_prob(n) for n in a.n]
    if a.model == "sieve-adjusted":
        return [heuristics.sieve_adjusted_prob(n, a.B) for n in a.n]
    return [heuristics.fullness_ratio_prob(n, a.alpha) for n in a.n]


def cmd_expectation(a, cfg):
    if a.model == "hardy-wright":
        return [heuristics.hardy_wright_expectation(a.A, a.from_, None if a.terms is None else a.from_ + a.terms - 1)]
    return [heuristics.expected_new_fermat_primes(a.from_, a.model.replace("-", "_"), a.terms or 64, a.alpha)]


def cmd_interval_req(a, cfg):
    if a.n is not None:
        return [heuristics.interval_requirement(None, a.delta, a.epsilon, a.multiplier, log_x=heuristics.log_fermat(a.n))]
    if a.x is None:
        raise UsageError("give --n or --x")
    return [heuristics.interval_requirement(a.x, a.delta, a.epsilon, a.multiplier)]


def cmd_harmonic(a, cfg):
    return [heuristics.mersenne_harmonic(X) for X in a.X]


def cmd_mersenne_census(a, cfg):
    return [heuristics.special_mersenne_expectation(a.a, a.b, a.X, a.ll_limit)]


def cmd_db_verify(a, cfg):
    report = fermat.verify_database(a.path)
    if not report.checksum_ok:
        print(f"fermatlab: checksum mismatch in {a.path} at byte offset {report.checksum_offset}", file=sys.stderr)
    return [report, {"kind": "DatabaseSummary", "records": len(report.records), "checksum_ok": report.checksum_ok, "passed": report.passed}]


def cmd_db_seed(a, cfg):
    db = fermat.FactorDatabase.load(a.path) if os.path.exists(a.path) else fermat.FactorDatabase()
    added = db.append(a.path, [r for r in fermat.published_seed() if r.verified])
    return [{"kind": "DatabaseSeed", "path": a.path, "added": len(added), "total": len(db)}]


# -- parser --------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--format", choices=("text", "csv"), default="text", help="structured text (JSON lines, default) or CSV")
    g.add_argument("--output", "-o", help="write the report here instead of standard output")
    g.add_argument("--seed", type=int, default=None, help="seed for randomised experiments (default 0)")
    g.add_argument("--bit-budget", type=int, default=int(os.environ.get(ENV_BIT_BUDGET, ntkernel.DEFAULT_BIT_BUDGET)), help=f"largest operand in bits (env {ENV_BIT_BUDGET}; default %(default)s)")
    g.add_argument("--effort-budget", type=int, default=ntkernel.RHO_ITERATIONS, help="rho iterations per factorization (default %(default)s)")
    g.add_argument("--db", default=os.environ.get(ENV_DB), help=f"factor database path (env {ENV_DB})")
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes (default: available CPUs)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress and wall time to standard error")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="fermatlab", description="Computational experiments on Fermat numbers and heuristic primality models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def add(name, func, help, desc):
        p = sub.add_parser(name, parents=[common], help=help, description=desc, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("pepin", cmd_pepin, "Pepin's test for F_n", "Pepin's test: F_n is prime iff 3^((F_n-1)/2) = -1 mod F_n. Reports the low 64 bits of the final residue.")
    p.add_argument("--n", type=int, required=True, help="Fermat index (>= 1), or exponent e with --ferma-t")
    p.add_argument("--ferma-t", action="store_true", help="test 2^n + 1 instead (the convention admitting 2 at n = 0)")

    p = add("lucas-lehmer", cmd_lucas_lehmer, "Lucas-Lehmer test for M_p", "Lucas-Lehmer test of 2^p - 1 for an odd prime p.")
    p.add_argument("--p", type=int, required=True)

    p = add("trace", cmd_trace, "repeated-squaring residue trace", "Square 2 repeatedly mod p; reaching -1 at step r shows p divides F_r.")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--max-steps", type=int, default=1 << 16)

    p = add("factorize", cmd_factorize, "factor an integer", "Trial division then Brent's rho; unsplit composites are reported as the cofactor.")
    p.add_argument("value", type=int)

    p = add("factor-search", cmd_factor_search, "search for Fermat factors k*2^m+1", "Enumerate primes k*2^m+1 with small odd k and test them against F_n by repeated squaring.")
    p.add_argument("--n", type=int, help="single Fermat index (sets both --n-lo and --n-hi)")
    p.add_argument("--n-lo", type=int)
    p.add_argument("--n-hi", type=int)
    p.add_argument("--k-max", type=int, default=fermat.DEFAULT_K_MAX)
    p.add_argument("--m-max", type=int, default=fermat.DEFAULT_M_MAX)

    p = add("classify", cmd_classify, "split indices into lists (A) and (B)", "List (A): indices with a verified factor in the database; list (B): the rest of the range.")
    p.add_argument("--n-lo", type=int, default=33)
    p.add_argument("--n-hi", type=int, default=43)
    p.add_argument("--seed-published", action="store_true", help="add the verified published factors first")

    p = add("dubner-keller", cmd_dubner_keller, "fraction of primes k*2^m+1 dividing a Fermat number", "Empirical dividing fraction among Proth primes k*2^m+1, compared with 1/k.")
    p.add_argument("--k", type=int, nargs="+", default=[3, 5, 9])
    p.add_argument("--m-lo", type=int, default=1)
    p.add_argument("--m-hi", type=int, default=400)

    p = add("identities", cmd_identities, "product recurrence and coprimality of F_n", "Check F_0...F_n + 2 = F_(n+1) and pairwise coprimality.")
    p.add_argument("--n-max", type=int, default=10)

    p = add("kfull-ratio", cmd_kfull_ratio, "K-full count over primes 1 mod K", "Ratio of K-full integers to primes 1 mod K in [x-r, x+r] for each r.")
    p.add_argument("--x", type=int, default=10**7)
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--r", type=int, nargs="+", help="half-widths (default 1e6 1e5 1e4 (log x)^3)")

    p = add("mertens", cmd_mertens, "Mertens product over primes <= B", "prod_{p<=B} (1-1/p)^-1 against e^gamma log B.")
    p.add_argument("--B", type=int, nargs="+", default=[10**6])

    p = add("selberg-window", cmd_selberg_window, "prime counts in short windows", "Share of windows (t, t+y], t in [x, 2x), whose prime count is within epsilon of y/log t.")
    p.add_argument("--x", type=int, default=10**8)
    p.add_argument("--y", type=int, help="window length (default multiplier * log^2 x)")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--epsilon", type=float, default=intervals.DEFAULT_TOLERANCE)
    p.add_argument("--multiplier", type=float, default=intervals.DEFAULT_MULTIPLIER)

    p = add("second-moment", cmd_second_moment, "variance of psi increments in progressions", "Integral over [x, 2x] of (psi(y+h;q,a) - psi(y;q,a) - h/phi(q))^2, summed over a, against h x log^2(qx).")
    p.add_argument("--x", type=int, default=10**5)
    p.add_argument("--h", type=float, default=10**3)
    p.add_argument("--q", type=int, default=8)
    p.add_argument("--step", type=float, help="integration step (default max(1, h/100))")
    p.add_argument("--tolerance", type=float, default=0.5)
    p.add_argument("--share", type=float, default=0.1, help="failing share of y that makes a class exceptional")

    p = add("balls-cups", cmd_balls_cups, "balls into cups concentration", "Throw B balls into C cups; a trial passes when every cup holds (1 +- epsilon) B/C.")
    p.add_argument("--B", type=int, help="balls (default ceil(10 C ln C))")
    p.add_argument("--C", type=int, default=100)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--multiplier", type=float, default=10.0)

    p = add("prob", cmd_prob, "primality probability of F_n", "Naive 2/log F_n, small-divisor adjusted, or the fullness ratio phi(2^(n+2))/phi(2^(alpha n)).")
    p.add_argument("--model", choices=("naive", "sieve-adjusted", "fullness-ratio"), default="fullness-ratio")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--B", type=int, default=10**6)
    p.add_argument("--alpha", type=int, default=2)

    p = add("expectation", cmd_expectation, "expected number of new Fermat primes", "Sum a model's probability over n >= from; the fullness-ratio model has the exact tail 4/2^(from-1).")
    p.add_argument("--model", choices=("fullness-ratio", "naive", "hardy-wright"), default="fullness-ratio")
    p.add_argument("--from", dest="from_", type=int, default=heuristics.FIRST_UNKNOWN_INDEX)
    p.add_argument("--terms", type=int, help="partial-sum terms (default 64; hardy-wright: to working precision)")
    p.add_argument("--alpha", type=int, default=2)
    p.add_argument("--A", type=float, default=1.0)

    p = add("interval-req", cmd_interval_req, "interval half-widths needed around x", "(log x)^(1+delta+eps) for equidistribution and (log x)^(2+delta+eps) for uniformity.")
    p.add_argument("--n", type=int, help="use x = F_n")
    p.add_argument("--x", type=int)
    p.add_argument("--delta", type=float, default=2)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--multiplier", type=float, default=100)

    p = add("harmonic", cmd_harmonic, "sum of 1/p over primes <= X", "Partial sums of 1/p against log log X + M.")
    p.add_argument("--X", type=int, nargs="+", default=[10**6])

    p = add("mersenne-census", cmd_mersenne_census, "Mersenne exponents p with ap+b prime", "Census of primes p <= X with ap+b prime, the sum of 1/(ap+b) and Lucas-Lehmer verdicts on M_p.")
    p.add_argument("--a", type=int, default=1)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--X", type=int, default=2000)
    p.add_argument("--ll-limit", type=int, default=2000)

    db = sub.add_parser("db", help="factor database maintenance")
    dbsub = db.add_subparsers(dest="db_command", required=True, parser_class=_Parser)
    for name, func, desc in (("verify", cmd_db_verify, "Check the checksum and re-run the residue trace of every record."),
                             ("seed", cmd_db_seed, "Append the verified published factors.")):
        p = dbsub.add_parser(name, parents=[common], help=desc, description=desc, formatter_class=fmt)
        p.add_argument("path")
        p.set_defaults(func=func)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> RunReport:
    start = time.perf_counter()
    results = args.func(args, config)
    report = RunReport(config, results, time.perf_counter() - start, _versions())
    report.failed = any(getattr(r, "passed", True) is False or (isinstance(r, dict) and r.get("passed") is False) for r in results)
    return report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    name = args.command if args.command != "db" else f"db {args.db_command}"
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _COMMON}
    config = RunConfig(name, params, args.format, args.seed, args.bit_budget, args.effort_budget, args.db, args.workers)
    try:
        report = run(config, args)
    except ResourceError as e:
        print(f"fermatlab: resource refusal: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except fermat.DatabaseError as e:
        print(f"fermatlab: database error: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except FactorizationError as e:
        print(f"fermatlab: effort exhausted: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, UsageError) as e:
        print(f"fermatlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    log.info("wall time %.3f s", report.wall_time)
    text = report.render()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_VERIFY if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
