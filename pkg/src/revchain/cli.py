"""Command-line interface: ``revchain {reverse,oracle,simulate,check}``.

Exit codes: 0 success, 1 input error, 2 verification mismatch, 3 enumeration
guard exceeded.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from . import __version__
from .errors import RevchainError, TooLarge
from .formats import ResultFile, parse_inputs, resolve_example, write_result
from .montecarlo import BAND_Z, band_violations, mc_estimate
from .oracle import compare, oracle_reverse
from .reversal import ArbitraryPolicy, reverse_process

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH, EXIT_GUARD = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--chain", help="chain JSON file")
    src.add_argument("--example", help="name of a shipped example (e.g. filo_store)")
    p.add_argument("--window", help="window JSON file (length, c0, cl)")
    p.add_argument("--length", type=int, help="window length l >= 1")
    p.add_argument("--c0", help="cluster observed for theta(0) = eta(l), e.g. '1,3'")
    p.add_argument("--cl", help="cluster observed for theta(l) = eta(0)")
    p.add_argument("--policy", choices=[x.value for x in ArbitraryPolicy], default="zero")
    p.add_argument("--zero-floor", type=float, default=0.0,
                   help="conditioning masses at or below this count as zero")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=["json", "csv"], default="json")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit status 2 is reserved for mismatches
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="revchain",
        description="Conditioned time-reversed Markov chains over a finite window.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reverse", help="closed-form reversed process")
    _common(p)
    p = sub.add_parser("oracle", help="reversed process by exhaustive path enumeration")
    _common(p)
    p = sub.add_parser("simulate", help="rejection-sampling estimate")
    _common(p)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("check", help="closed form vs. enumeration (and optionally sampling)")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _load(args):
    chain_path = args.chain if args.chain else resolve_example(args.example)
    return parse_inputs(
        chain_path,
        {"window": args.window, "length": args.length, "c0": args.c0, "cl": args.cl},
    )


def _emit(args, result: ResultFile, out) -> None:
    text = write_result(result, args.format, args.out)
    if args.out is None:
        out.write(text)


def _fmt_set(s) -> str:
    return "{" + ",".join(str(x) for x in sorted(s)) + "}"


def _check(args, chain, window, out) -> int:
    lemma = reverse_process(chain, window, args.policy, args.zero_floor)
    oracle = oracle_reverse(chain, window, args.policy)
    report = compare(lemma, oracle, args.tol)
    ell, n = window.length, chain.num_states
    print(f"revchain check  N={n}  l={ell}  C0={_fmt_set(window.c0)}  Cl={_fmt_set(window.cl)}", file=out)
    print(f"e lemma={lemma.e!r}  oracle={oracle.e!r}  |diff|={report.e_dev:.3e}", file=out)
    rows = int(lemma.row_defined.sum())
    print(f"defined P rows: lemma {rows}/{ell * n}, oracle {int(oracle.row_defined.sum())}/{ell * n}", file=out)
    failed = not report.passed
    if not report.comparable:
        print("observation has probability zero: nothing comparable", file=out)
    else:
        print(f"max |lemma - oracle| on mutually defined entries: {report.max_deviation:.3e} (tol {args.tol:g})",
              file=out)
    for m in report.mismatches[:20]:
        print(f"  mismatch {m}", file=out)
    if report.reference_only and args.zero_floor == 0.0:
        failed = True
        for m in report.reference_only[:20]:
            print(f"  defined only in oracle {m}", file=out)

    if args.samples:
        if lemma.e > 0:
            est = mc_estimate(chain, window, args.samples, args.seed, args.workers)
            bad = band_violations(est, lemma)
            print(f"monte carlo: n={est.n} accepted={est.accepted} e_hat={est.e!r} "
                  f"violations beyond {BAND_Z:g} SE: {len(bad)}", file=out)
            for v in bad[:20]:
                print(f"  band {v}", file=out)
            failed = failed or bool(bad)
        else:
            print("monte carlo: skipped (observation has probability zero)", file=out)
    print("result: " + ("FAIL" if failed else "PASS"), file=out)
    return EXIT_MISMATCH if failed else EXIT_OK


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        chain, window = _load(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if args.command == "reverse":
                proc = reverse_process(chain, window, args.policy, args.zero_floor)
                _emit(args, ResultFile(proc, window), out)
            elif args.command == "oracle":
                proc = oracle_reverse(chain, window, args.policy)
                _emit(args, ResultFile(proc, window), out)
            elif args.command == "simulate":
                est = mc_estimate(chain, window, args.samples, args.seed, args.workers)
                se = {"e": est.e_se, "pi": est.pi_se, "P": est.p_se}
                _emit(args, ResultFile(est.to_process(), window, se), out)
            else:
                return _check(args, chain, window, out)
    except TooLarge as exc:
        print(f"revchain: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (RevchainError, ValueError) as exc:
        print(f"revchain: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
