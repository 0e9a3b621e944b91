"""Command-line front end.

Exit codes: 0 ok, 1 check or validation failure, 2 parse error, 3 I/O error.
Progress goes to standard error; data goes only to files under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import output, stats
from .acceptance import AcceptanceSuite, report
from .config import ConfigError, ConfigParseError, ExperimentConfig, bundled_names, load_config
from .des import replicate
from .fluid import FluidDomainError
from .model import classify, validate_spec

log = logging.getLogger("closednet")

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3


def _out_dir(args, cfg: Optional[ExperimentConfig]) -> Path:
    path = Path(args.out or (cfg.output_dir if cfg else "out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.reps is not None:
        changes["n_reps"] = args.reps
    return cfg.replace(**changes) if changes else cfg


def cmd_validate(args) -> int:
    cfg = _load(args)
    bad = validate_spec(cfg.network)
    if bad:
        for v in bad:
            print(f"{v.code}: {v.message}")
        return EXIT_FAIL
    rep = classify(cfg.network)
    print(json.dumps(rep.to_dict(), indent=1, sort_keys=True))
    return EXIT_OK


def cmd_fluid(args) -> int:
    cfg = _load(args)
    bad = validate_spec(cfg.network)
    if bad:
        for v in bad:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args, cfg)
    try:
        path = output.write_fluid(cfg, out, args.form)
    except FluidDomainError as exc:
        print(f"fluid: {exc}", file=sys.stderr)
        return EXIT_FAIL
    log.info("wrote %s", path)
    return EXIT_OK


def simulate_to(cfg: ExperimentConfig, out: Path, workers: int = 1, backend=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    trajs = replicate(cfg.sim_config(), cfg.n_reps, workers, backend)
    output.write_trajectories(trajs, out)
    output.write_predeparture(trajs, out)
    output.write_crossings(trajs, out)
    summary = output.summarize(cfg, trajs)
    output.write_json(summary, out / "summary.json")
    output.write_json(output.SCHEMA, out / "schema.json")
    return summary


def cmd_simulate(args) -> int:
    cfg = _load(args)
    bad = validate_spec(cfg.network)
    if bad:
        for v in bad:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args, cfg)
    log.info("simulating %s: %d replications on %d worker(s)", cfg.name, cfg.n_reps, args.threads)
    summary = simulate_to(cfg, out, args.threads)
    log.info("wrote %d replications to %s", summary["n_reps"], out)
    return EXIT_OK if summary["crossing_identity_failures"] == 0 else EXIT_FAIL


def cmd_crossings(args) -> int:
    cfg = _load(args)
    bad = validate_spec(cfg.network)
    if bad:
        for v in bad:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args, cfg)
    trajs = replicate(cfg.sim_config(keep_records=False), cfg.n_reps, args.threads)
    output.write_crossings(trajs, out)
    failures = sum(len(stats.crossing_identity_violations(tr)) for tr in trajs)
    log.info("crossing identity failures: %d", failures)
    return EXIT_OK if failures == 0 else EXIT_FAIL


def cmd_verify(args) -> int:
    only = set(args.only) if args.only else None
    suite = AcceptanceSuite(workers=args.threads, rho_scale=args.rho_scale, form=args.form,
                            n_reps=args.reps)
    results = suite.run(only)
    for r in results:
        print(r.line(), file=sys.stderr)
    diag = suite.diagnostics() if args.diagnostics else []
    for r in diag:
        print("diagnostic " + r.line(), file=sys.stderr)
    out = _out_dir(args, None)
    output.write_json(report(results, diag), out / "report.json")
    failed = [r.number for r in results if not r.passed]
    if failed:
        print("failed criteria: " + ", ".join(map(str, failed)), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="closednet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--reps", type=int, help="override the number of replications")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")

    common(sub.add_parser("validate", help="check a network description and classify its topology"))
    sp = sub.add_parser("fluid", help="write closed-form fluid curves")
    common(sp)
    sp.add_argument("--form", choices=("beta_product", "balance"), default="beta_product")
    common(sub.add_parser("simulate", help="run replications and write observables"))
    common(sub.add_parser("crossings", help="tabulate up/down crossings"))
    sp = sub.add_parser("verify", help="run the acceptance suite on the bundled scenarios")
    common(sp, needs_config=False)
    sp.add_argument("--config", help="ignored; the suite uses the bundled scenarios")
    sp.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    sp.add_argument("--form", choices=("beta_product", "balance"), default="beta_product")
    sp.add_argument("--rho-scale", type=float, default=1.0,
                    help="multiply utilizations (negative control)")
    sp.add_argument("--diagnostics", action="store_true",
                    help="also rerun the utilization checks with the balance form")
    sub.add_parser("scenarios", help="list bundled scenario names")
    return p


COMMANDS = {"validate": cmd_validate, "fluid": cmd_fluid, "simulate": cmd_simulate,
            "crossings": cmd_crossings, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose or args.command != "validate" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    if args.command == "scenarios":
        print("\n".join(bundled_names()))
        return EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
