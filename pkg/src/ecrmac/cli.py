"""``ecrmac`` command line: run, sweep and verify.

Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime or I/O, 4 audit failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from .audit import verify
from .experiment import PROTOCOLS, run_pair, sweep
from .metrics import emit
from .scenario import ScenarioConfig, ScenarioError, default_scenario, load_scenario, validate
from .trace import read_trace

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_AUDIT = 0, 1, 2, 3, 4
DEFAULT_FLOWS = (2, 10, 20, 30)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flow_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("flow counts must be non-negative integers")
    return vals


def _rate(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("sensing error rate must lie in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ecrmac", description="ECR-MAC cognitive-radio MAC simulator and DCF baseline.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--scenario", type=Path,
                        help="scenario YAML (default: the built-in 80-node evaluation setup)")
        sp.add_argument("--protocol", choices=("ecr", "dcf", "both"), default="both",
                        help="which MAC(s) to simulate (default: both)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--no-doze", action="store_true",
                        help="idle instead of doze in unused slots (energy ablation)")
        sp.add_argument("--sensing-error", type=_rate, metavar="RATE",
                        help="probability that a sensing result is flipped")

    r = sub.add_parser("run", help="simulate one scenario and seed")
    common(r)
    r.add_argument("--seed", type=int, help="random seed (default: the scenario's rng_seed)")
    r.add_argument("--flows", type=int, help="override the number of random flows")
    r.add_argument("--summary-trace", action="store_true",
                   help="keep only summary records in the trace")

    s = sub.add_parser("sweep", help="flow-count x seed sweep, one combined CSV")
    common(s)
    s.add_argument("--flows", type=_flow_list, default=DEFAULT_FLOWS, metavar="A,B,C",
                   help="flow counts (default: 2,10,20,30)")
    s.add_argument("--seeds", type=int, default=10, metavar="N", help="seeds 1..N (default: 10)")
    s.add_argument("--seed", type=int, default=1, help="first seed (default: 1)")

    v = sub.add_parser("verify", help="audit one or more trace files")
    v.add_argument("traces", nargs="+", type=Path)
    return p


def _config(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario) if args.scenario else default_scenario()
    if args.sensing_error is not None:
        cfg = dataclasses.replace(cfg, sensing_error_rate=args.sensing_error)
    return validate(cfg)


def _protocols(args) -> tuple[str, ...]:
    return PROTOCOLS if args.protocol == "both" else (args.protocol,)


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.flows is not None:
        cfg = validate(dataclasses.replace(cfg, num_flows=args.flows, flows=None))
    seed = cfg.rng_seed if args.seed is None else args.seed
    protos = _protocols(args)
    results = run_pair(cfg, seed, protos, doze=not args.no_doze and cfg.doze_enabled,
                       full_trace=not args.summary_trace)
    args.out.mkdir(parents=True, exist_ok=True)
    emit([r.report for r in results], "csv", args.out / "report.csv", include_aggregate=False)
    for i, r in enumerate(results):
        name = "trace.jsonl" if i == 0 else f"trace-{r.protocol}.jsonl"
        r.trace.write(args.out / name)
        rep = r.report
        print(f"{rep.protocol}: delivered {rep.delivered_packets}/{rep.generated} packets, "
              f"throughput {rep.throughput:.0f} b/s, delay {_opt(rep.avg_end_to_end_delay)} s, "
              f"energy/packet {_opt(rep.per_packet_energy)} J -> {args.out / name}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    if args.seeds < 1:
        print("ecrmac: --seeds must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    res = sweep(cfg, args.flows, seeds, _protocols(args),
                doze=not args.no_doze and cfg.doze_enabled,
                progress=lambda m: print(m, file=sys.stderr, flush=True))
    args.out.mkdir(parents=True, exist_ok=True)
    emit(res.reports, "csv", args.out / "sweep.csv")
    print(f"{len(res.results)} runs -> {args.out / 'sweep.csv'}")
    if res.failures:
        with (args.out / "failures.txt").open("w") as fh:
            for proto, f, s, msg in res.failures:
                fh.write(f"{proto}\t{f}\t{s}\t{msg}\n")
        print(f"{len(res.failures)} run(s) failed, see {args.out / 'failures.txt'}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    status = EXIT_OK
    for path in args.traces:
        try:
            recs = read_trace(path)
        except OSError as exc:
            print(f"{path}: cannot read trace: {exc.strerror}", file=sys.stderr)
            return EXIT_RUNTIME
        except ValueError as exc:
            print(f"{exc}", file=sys.stderr)
            return EXIT_VALIDATION
        try:
            rep = verify(recs)
        except (KeyError, TypeError, ValueError) as exc:
            print(f"{path}: malformed trace ({type(exc).__name__}: {exc})", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"{path}: {'clean' if rep.ok else 'VIOLATIONS'}")
        for line in rep.lines():
            print(f"  {line}")
        if not rep.ok:
            status = EXIT_AUDIT
    return status


def _opt(x) -> str:
    return "n/a" if x is None else f"{x:.4g}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    handler = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except ScenarioError as exc:
        print("ecrmac: invalid scenario:", file=sys.stderr)
        for fld, msg in exc.problems:
            print(f"  {fld}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"ecrmac: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"ecrmac: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
