"""Command-line entry point: synth, track, eval, ablate, selftest, bench."""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from ontrack.config import get_settings
from ontrack.core.exceptions import OntrackError
from ontrack.logging_config import get_logger, setup_logging
from ontrack.models.configs import SynthSpec
from ontrack.models.reports import EvalProtocol
from ontrack.services.ablation import TABLES, deforming_specs, run_ablation
from ontrack.services.bench import run_bench
from ontrack.services.dataset_io import read_boxes, read_meta
from ontrack.services.evaluation import evaluate
from ontrack.services.runner import run_dataset
from ontrack.services.selftest import run_selftest
from ontrack.services.synth import synth_sequence
from ontrack.utils.constants import ABLATION_SEEDS, GROUNDTRUTH_FILE, META_FILE, RESULTS_FILE
from ontrack.utils.helpers import load_model, load_tracker_config

logger = get_logger(__name__)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override one config value (repeatable), e.g. rmg.lambda_reg=0.5",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ontrack", description="Online single-target tracker and harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic sequence in dataset layout")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("track", help="track a dataset directory and write a results file")
    _add_config_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--results", help=f"results file (default: <dataset>/{RESULTS_FILE})")
    p.add_argument("--protocol", choices=[e.value for e in EvalProtocol], default=EvalProtocol.OTB.value)

    p = sub.add_parser("eval", help="evaluate a results file against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--protocol", choices=[e.value for e in EvalProtocol], default=EvalProtocol.OTB.value)
    p.add_argument("--json", dest="json_path", help="also write the report as JSON")

    p = sub.add_parser("ablate", help="run ablation tables on synthetic sequences")
    _add_config_args(p)
    p.add_argument("--table", choices=sorted(TABLES) + ["all"], default="all")
    p.add_argument("--sequences", type=int, default=len(ABLATION_SEEDS))
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--workers", type=int, help="parallel sequences (default: FCOT_WORKERS)")
    p.add_argument("--json", dest="json_path", help="also write the tables as JSON")

    p = sub.add_parser("selftest", help="run the numerical self-checks")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="per-stage timing on a synthetic sequence")
    _add_config_args(p)
    p.add_argument("--frames", type=int, default=50)
    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_model(SynthSpec, args.config, args.overrides)
    synth_sequence(spec, args.out)
    print(f"wrote {spec.frames} frames to {args.out}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    cfg = load_tracker_config(args.config, args.overrides)
    results = args.results or str(Path(args.dataset) / RESULTS_FILE)
    result, meta = run_dataset(args.dataset, cfg, results, args.protocol)
    print(f"tracked {meta.frames} frames at {meta.fps:.2f} fps, {meta.failures} failures -> {results}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    predictions = read_boxes(args.results)
    ground_truth = read_boxes(Path(args.dataset) / GROUNDTRUTH_FILE)
    meta_path = Path(args.results).parent / META_FILE
    fps = read_meta(meta_path).fps if meta_path.exists() else None
    report = evaluate(predictions, ground_truth, args.protocol, fps=fps)
    print(report.to_text())
    if args.json_path:
        Path(args.json_path).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_tracker_config(args.config, args.overrides)
    if args.sequences < 1 or args.frames < 2:
        raise OntrackError("--sequences must be >= 1 and --frames >= 2")
    specs = deforming_specs(range(args.sequences), args.frames)
    names = sorted(TABLES) if args.table == "all" else [args.table]
    tables = [run_ablation(name, cfg, specs, args.workers) for name in names]
    print("\n\n".join(t.to_text() for t in tables))
    if args.json_path:
        payload = [t.model_dump(mode="json") for t in tables]
        Path(args.json_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<18} {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_tracker_config(args.config, args.overrides)
    report = run_bench(cfg, SynthSpec(frames=args.frames))
    print(report.to_text())
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "track": cmd_track,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "selftest": cmd_selftest,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging()
    settings = get_settings()
    logger.info(f"[CLI] {settings.APP_NAME} {settings.APP_VERSION}: {args.command}")
    try:
        return COMMANDS[args.command](args)
    except (OntrackError, ValidationError, OSError) as e:
        logger.error(f"[CLI] {args.command} failed: {e}", exc_info=True)
        message = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"ontrack {args.command}: error: {message}", file=sys.stderr)
        return 1


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
