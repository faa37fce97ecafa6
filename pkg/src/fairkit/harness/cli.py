"""Command-line entry point: ``fairkit audit|mitigate|synth|report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 experiment cells failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..cohort import save_schema, write_csv
from ..errors import FairkitError, IncompleteReport
from ..synth import CohortSpec, cohort_schema, generate_cohort, load_cohort_spec
from .config import load_config
from .experiment import run_experiment
from .io import load_report, round_sig, write_csv_tables, write_json
from .svg import render_figures

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CELLS = 0, 1, 2, 3

log = logging.getLogger("fairkit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, config_help):
    p.add_argument("--config", required=True, help=config_help)
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the configured seed (unsigned 64-bit)")
    p.add_argument("--format", choices=("json", "csv", "both"), default="json")
    p.add_argument("--fixed-clock", action="store_true",
                   help="zero timestamps and timings so reruns are byte-identical")


def build_parser():
    parser = _Parser(prog="fairkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("audit", help="base model and fairness report"), "experiment config")
    _common(sub.add_parser("mitigate", help="base model plus every configured mitigation"),
            "experiment config")
    _common(sub.add_parser("synth", help="generate a synthetic cohort"), "cohort spec file")
    _common(sub.add_parser("report", help="re-render outputs from a saved JSON report"),
            "saved report.json")
    return parser


def _experiment(args, mitigate):
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if not mitigate:
        config.mitigations = []
    out = Path(args.out or config.resolve(config.output_dir))
    out.mkdir(parents=True, exist_ok=True)
    report = run_experiment(config, fixed_clock=args.fixed_clock)
    failed = report.failed_cells()
    try:
        _write_outputs(report.to_dict(), out, args.format)
    except IncompleteReport as exc:
        if not failed:
            raise
        log.warning("figures skipped: %s", exc)
    for attr, method in failed:
        log.warning("cell %s/%s failed: %s", attr, method, report.cell(attr, method).get("error"))
    return EXIT_CELLS if failed else EXIT_OK


def _write_outputs(data, out, fmt):
    # figures come from the rounded view so a later ``report`` re-render matches byte for byte
    data = round_sig(data)
    if fmt in ("json", "both"):
        write_json(data, out / "report.json")
    if fmt in ("csv", "both"):
        write_csv_tables(data, out)
    for path in render_figures(data, out / "figures"):
        log.info("wrote %s", path)


def _synth(args):
    spec = load_cohort_spec(args.config)
    if args.seed is not None:
        spec = CohortSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(generate_cohort(spec), out / "cohort.csv")
    save_schema(cohort_schema(spec), out / "schema.yaml")
    return EXIT_OK


def _report(args):
    data = load_report(args.config)
    out = Path(args.out or Path(args.config).parent)
    out.mkdir(parents=True, exist_ok=True)
    if args.format in ("csv", "both"):
        write_csv_tables(data, out)
    for path in render_figures(data, out / "figures"):
        log.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        if args.command == "report":
            return _report(args)
        return _experiment(args, mitigate=args.command == "mitigate")
    except (FairkitError, OSError, ValueError, KeyError) as exc:
        print(f"fairkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
