"""Command-line front end (``brl``).

Exit codes: 0 success / all checks passed, 1 usage or configuration error,
2 a verification check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from .config import config_from_dict, load_config
from .covering import greedy_cover
from .errors import ConfigError
from .experiments import bound_for_m, run_sweep
from .numerics import RandomStream
from .operators import coherence_empirical, coherence_sparse
from .priors import prior_from_dict, sample_prior_batch
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
SEED_ENV = "BRL_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        seed = int(raw, 0)
    except ValueError:
        raise ConfigError("/master_seed", f"{SEED_ENV}={raw!r} is not an integer") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("/master_seed", f"{SEED_ENV} must be a 64-bit unsigned integer")
    return seed


def _load_experiment(path):
    try:
        config = load_config(path)
    except OSError as exc:
        raise ConfigError("/", f"cannot read {path}: {exc.strerror}") from None
    seed = _env_seed()
    if seed is not None:
        config = dataclasses.replace(config, master_seed=seed)
    return config


def _write(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    config = _load_experiment(args.config)
    report = run_sweep(config, threads=args.threads)
    _write(report.to_json(), args.out)
    if args.csv:
        _write(report.to_csv(), args.csv)
    return EXIT_OK


def cmd_bound(args) -> int:
    config = _load_experiment(args.config)
    if config.bound_mode == "none":
        config = dataclasses.replace(config, bound_mode="theorem_main")
    rows = []
    for m in config.m_values:
        rows.append({"m": int(m), "bound": bound_for_m(config, int(m))})
    _write(json.dumps({"bound_mode": config.bound_mode, "rows": rows}, sort_keys=True, indent=2) + "\n", None)
    return EXIT_OK


def _read_prior(path):
    try:
        with open(path, "rb") as fh:
            data = json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise ConfigError("/", f"cannot read {path}: {exc.strerror}") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and "schema" in data:
        return config_from_dict(data).real_prior
    return prior_from_dict(data)


def cmd_coherence(args) -> int:
    if args.prior_config:
        prior = _read_prior(args.prior_config)
        seed = args.seed if args.seed is not None else (_env_seed() or 0)
        try:
            mu = coherence_empirical(args.basis, prior.n, prior, args.pairs, RandomStream(seed).child("coherence"))
        except ValueError as exc:
            raise ConfigError("/", str(exc)) from None
        print(_dump({"mu": mu, "mode": "empirical", "basis": args.basis, "n": prior.n, "pairs": args.pairs}))
        return EXIT_OK
    if args.n is None or args.s is None:
        raise ConfigError("/", "coherence needs --n and --s (or --prior-config)")
    try:
        mu = coherence_sparse(args.basis, args.n, args.s)
    except ValueError as exc:
        raise ConfigError("/", str(exc)) from None
    print(_dump({"mu": mu, "mode": "exact_sparse", "basis": args.basis, "n": args.n, "s": args.s}))
    return EXIT_OK


def cmd_cover(args) -> int:
    prior = _read_prior(args.prior_config)
    if args.samples < 1:
        raise ConfigError("/samples", "samples must be >= 1")
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    samples = sample_prior_batch(prior, RandomStream(seed).child("cover"), args.samples)
    try:
        result = greedy_cover(samples, args.eta, args.delta)
    except ValueError as exc:
        raise ConfigError("/", str(exc)) from None
    print(_dump({"count": result.count, "covered_fraction": result.covered_fraction,
                 "eta": result.eta, "delta": result.delta}))
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    checks = run_suite(args.suite, seed, threads=args.threads, corrupt_dupp=args.corrupt_dupp)
    ok = True
    for check in checks:
        ok &= bool(check["pass"])
        print(_dump(dict(check, suite=args.suite, seed=seed)))
    print(_dump({"suite": args.suite, "seed": seed, "checks": len(checks), "pass": ok}))
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log one line per m to stderr")
    parser = _Parser(prog="brl", description="Posterior-sampling recovery experiments and bound evaluation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="run an experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--csv", help="also write the CSV table to this path")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bound", parents=[common], help="evaluate the attached bound for every m of a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("coherence", parents=[common], help="coherence of a basis relative to sparse vectors or a prior")
    p.add_argument("--basis", required=True, choices=("identity", "hadamard", "dct"))
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--prior-config", help="estimate from sampled prior pairs instead")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("cover", parents=[common], help="greedy approximate cover of prior samples")
    p.add_argument("--prior-config", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--corrupt-dupp", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    if getattr(args, "threads", 1) < 1:
        print("brl: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"brl: config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
