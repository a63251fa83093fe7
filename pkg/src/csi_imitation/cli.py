"""Command-line interface.

JSON goes to stdout, logs to stderr.  Exit codes: 0 imitable / success,
2 not imitable, 3 unknown, 1 failed check, 64 malformed input, 70 resource
limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from . import __version__
from .bench import run_census, run_sales_benchmark
from .errors import GraphFormatError, ResourceLimitError
from .gallery import GALLERY
from .generators import CensusConfig, parse_dimacs, random_3sat, sat_to_ldag
from .imitability import Decision, imitate_graphical
from .ldag import Ldag
from .oracles import adversarial_scm_search, dsep_suite, policy_suite, sat_suite
from .scm import DiscreteScm, check_csi, estimate_joint, observational, sample
from .surrogate import imitate_with_data

log = logging.getLogger("csi_imitation")

EXIT_FAILED = 1
EXIT_USAGE = 64
EXIT_RESOURCE = 70


def _read(path: Optional[str]) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise GraphFormatError(exc.strerror or str(exc), path) from None


def _load_graph(path: Optional[str]) -> Ldag:
    try:
        return Ldag.from_json(_read(path))
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc), path if path not in (None, "-") else "<stdin>") from None


def _load_scm(path: str, graph: Optional[Ldag] = None) -> DiscreteScm:
    try:
        return DiscreteScm.from_json(_read(path), graph)
    except GraphFormatError as exc:
        raise GraphFormatError(str(exc), path) from None


def _emit(args, payload) -> None:
    indent = None if args.json else 2
    sys.stdout.write(json.dumps(payload, indent=indent) + "\n")


def cmd_decide(args) -> int:
    g = _load_graph(args.graph)
    obs = None
    if args.obs:
        obs = observational(_load_scm(args.obs), args.cap_states)
    v = imitate_graphical(g, obs, cap=args.cap_states, threads=args.threads)
    _emit(args, v.to_dict(g))
    return v.decision.exit_code


def cmd_imitate(args) -> int:
    g = _load_graph(args.graph) if args.graph else None
    m = _load_scm(args.scm, g)
    g = m.graph
    if args.samples:
        obs = estimate_joint(sample(m, args.samples, args.seed), g.observed)
    else:
        obs = observational(m, args.cap_states)
    v = imitate_with_data(g, obs, threads=args.threads)
    out = v.to_dict(g)
    out["mode"] = {"samples": args.samples, "seed": args.seed} if args.samples else "exact"
    if args.adversarial_evidence and v.decision == Decision.UNKNOWN:
        found = adversarial_scm_search(g, args.trials, args.seed)
        out["adversarial_evidence"] = {"trials": found.trials, "best_gap": found.gap}
    _emit(args, out)
    return v.decision.exit_code


def cmd_census(args) -> int:
    cfg = CensusConfig(n=args.n[0], samples=args.samples, seed=args.seed,
                       label_prob=args.label_prob, num_context_vars=args.context_vars,
                       context_pool=args.context_pool, label_mode=args.label_mode)
    res = run_census(cfg, args.n, threads=args.threads, cap=args.cap_states, timing=not args.no_timing)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(res.to_csv())
        log.info("wrote %d rows to %s", len(res.rows), args.csv)
    out = res.to_dict()
    if args.plot_data:
        out["plot_data"] = res.plot_data()
    _emit(args, out)
    bad = sum(s["monotonicity_violations"] for s in res.summary.values())
    return EXIT_FAILED if bad else 0


def cmd_table1(args) -> int:
    rep = run_sales_benchmark(args.samples, args.seed, exact=not args.samples)
    _emit(args, rep.to_dict())
    return 0


def cmd_satgen(args) -> int:
    if args.cnf:
        f = parse_dimacs(_read(args.cnf))
    else:
        import numpy as np
        k, m = args.random
        f = random_3sat(k, m, np.random.default_rng(args.seed))
    sys.stdout.write(sat_to_ldag(f).to_json(indent=None if args.json else 2) + "\n")
    return 0


def cmd_validate(args) -> int:
    m = _load_scm(args.scm)
    g = _load_graph(args.graph) if args.graph else None
    rep = check_csi(m, g)
    _emit(args, rep.to_dict())
    return 0 if rep.ok else EXIT_FAILED


def cmd_oracle(args) -> int:
    if args.suite == "dsep":
        rep = dsep_suite(args.trials, args.queries, args.seed)
    elif args.suite == "policy":
        rep = policy_suite(args.trials, args.seed)
    else:
        rep = sat_suite(args.trials, args.seed)
    _emit(args, rep.to_dict())
    return 0 if rep.passed else EXIT_FAILED


def cmd_gallery(args) -> int:
    if args.name not in GALLERY:
        raise GraphFormatError(f"unknown graph {args.name!r}; choose from {sorted(GALLERY)}")
    sys.stdout.write(GALLERY[args.name]().to_json(indent=None if args.json else 2) + "\n")
    return 0


GLOBAL_DEFAULTS = {"seed": 0, "json": False, "threads": 1, "cap_states": 2 ** 22, "verbose": False}


def _global_flags(p: argparse.ArgumentParser, default) -> None:
    # registered on the root and on every subcommand so they work in either position
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--json", action="store_true", default=default, help="compact single-line JSON")
    p.add_argument("--threads", type=int, default=default)
    p.add_argument("--cap-states", type=int, default=default, help="state / context enumeration cap")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csi-imitate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    _global_flags(p, argparse.SUPPRESS)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    s = add("decide", help="graphical imitability decision")
    s.add_argument("--graph", help="LDAG JSON (default: stdin)")
    s.add_argument("--obs", help="SCM JSON supplying P(O) for the policy table")
    s.set_defaults(func=cmd_decide)

    s = add("imitate", help="data-assisted imitation with surrogates")
    s.add_argument("--graph", help="LDAG JSON (default: the graph embedded in --scm)")
    s.add_argument("--scm", required=True)
    s.add_argument("--samples", type=int, help="estimate P(O) from this many draws")
    s.add_argument("--adversarial-evidence", action="store_true",
                   help="on Unknown, search compatible models for a positive policy gap")
    s.add_argument("--trials", type=int, default=200)
    s.set_defaults(func=cmd_imitate)

    s = add("census", help="random-graph imitability census")
    s.add_argument("--n", type=int, nargs="+", default=[50, 100, 150])
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--label-prob", type=float, default=0.5)
    s.add_argument("--context-vars", type=int, default=3)
    s.add_argument("--context-pool", choices=["parents", "ancestors", "any"], default="parents")
    s.add_argument("--label-mode", choices=["per_assignment", "per_edge"], default="per_assignment")
    s.add_argument("--csv", help="write per-instance rows here")
    s.add_argument("--plot-data", action="store_true")
    s.add_argument("--no-timing", action="store_true", help="write wall_ms=0 for byte-stable output")
    s.set_defaults(func=cmd_census)

    s = add("table1", help="pricing benchmark (exact unless --samples)")
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_table1)

    s = add("satgen", help="encode a 3-CNF as an LDAG")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--cnf", help="DIMACS file ('-' for stdin)")
    g.add_argument("--random", type=int, nargs=2, metavar=("K", "M"))
    s.set_defaults(func=cmd_satgen)

    s = add("validate", help="check CPTs against labels")
    s.add_argument("--scm", required=True)
    s.add_argument("--graph", help="check this graph's labels instead of the embedded ones")
    s.set_defaults(func=cmd_validate)

    s = add("oracle", help="cross-check against brute-force references")
    s.add_argument("--suite", choices=["dsep", "policy", "sat"], required=True)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--queries", type=int, default=20)
    s.set_defaults(func=cmd_oracle)

    s = add("gallery", help="print a bundled example graph")
    s.add_argument("name")
    s.set_defaults(func=cmd_gallery)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except GraphFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
