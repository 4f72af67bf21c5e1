"""Command-line entry point.

Exit codes: 0 all checks pass, 1 hypothesis violated, 2 undecided, 3 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .errors import BclabError, ConfigError, IncompleteCertification
from .fixedpoints import rate_estimate
from .maps import make_family
from .perturbation import NormalizedModel, verify_no_new_fixed
from .plane import BoxRect
from .scenarios import ScenarioConfig, run

log = logging.getLogger("bclab")

USAGE_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bclab", description="Certified fixed-point experiments for planar branched covers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario config file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: the config's 'out' key, else bclab-out/<scenario>)")
    r.add_argument("--delta", type=_positive(float), help="raster resolution")
    r.add_argument("--budget", type=_positive(int))
    r.add_argument("--seed", type=int)

    v = sub.add_parser("verify-perturbation", help="check that h o f has c as its only fixed point in V")
    v.add_argument("--delta", type=_positive(float), default=1e-3, help="search resolution (default 1e-3)")
    v.add_argument("--samples", type=_positive(int), default=10_000)
    v.add_argument("--levels", type=_positive(int), default=10)
    v.add_argument("--exponent", type=_positive(float), default=1.0)
    v.add_argument("--budget", type=_positive(int), default=5_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="directory for perturbation.txt and perturbation.csv")

    q = sub.add_parser("rate", help="count periodic points of an iterate on a punctured frame")
    q.add_argument("--family", default="monomial")
    q.add_argument("--d", type=_positive(int), default=2)
    q.add_argument("--N", type=_positive(int), default=4)
    q.add_argument("--delta", type=_positive(float), default=1e-6, help="certificate box width")
    q.add_argument("--radius", type=_positive(float), default=1.5, help="half-width of the square frame")
    q.add_argument("--exclusion", type=float, default=0.1, help="radius removed around the puncture")
    q.add_argument("--budget", type=_positive(int), default=5_000_000)
    return p


def _cmd_run(args) -> int:
    cfg = ScenarioConfig.load(args.config).with_overrides(delta=args.delta, budget=args.budget, seed=args.seed)
    out = Path(args.out or cfg.out or Path("bclab-out") / cfg.scenario)
    report = run(cfg)
    report.write(out)
    print(report.to_text(), end="")
    print(f"wrote {out}")
    return report.exit_code


def _cmd_verify(args) -> int:
    rep = verify_no_new_fixed(NormalizedModel(args.exponent), delta=args.delta, samples=args.samples,
                              levels=args.levels, seed=args.seed, budget=args.budget)
    text = rep.to_text()
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "perturbation.txt").write_text(text)
        rep.to_csv(out / "perturbation.csv")
    if rep.passed:
        return 0
    if rep.certificates is not None and not rep.certificates.complete:
        return 2
    return 1


def _cmd_rate(args) -> int:
    f = make_family(args.family, d=args.d)
    s = args.radius
    try:
        series = rate_estimate(f, args.N, BoxRect(-s, s, -s, s), args.delta, puncture=f.critical_point,
                               r_in=args.exclusion, budget=args.budget)
    except IncompleteCertification as exc:
        print(f"undecided: {exc}")
        return 2
    print(f"{'n':>3} {'count':>8} {'bound':>8} {'log(count)/n':>14}")
    ok = True
    for (n, k), (_, e) in zip(series.counts, series.estimates):
        bound = f.degree ** n - 1
        ok &= k >= bound
        print(f"{n:>3} {k:>8} {bound:>8} {e:>14.10f}")
    print(f"log d = {math.log(f.degree):.10f}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify-perturbation":
            return _cmd_verify(args)
        return _cmd_rate(args)
    except ConfigError as exc:
        print(f"bclab: config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except BclabError as exc:
        print(f"bclab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
