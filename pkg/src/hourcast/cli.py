"""Command-line entry point: ``hourcast <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .events import write_events_jsonl
from .exceptions import HourcastError
from .synth import SynthConfig, synth_generate

logger = logging.getLogger("hourcast")


def _common(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--output-dir", help="artifact directory (config key output_dir)")
    p.add_argument("--seed", type=int, required=seed_required, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hourcast", description="Hourly activity forecasting and network simulation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate an event log (or synthesize one) into the workspace")
    _common(p)
    p.add_argument("--events", help="JSONL or CSV event file")
    p.add_argument("--format", choices=["jsonl", "csv"], dest="events_format")

    p = sub.add_parser("synth", help="write a synthetic event log")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    for name, default in SynthConfig().to_dict().items():
        if name in ("seed", "platforms"):
            continue
        p.add_argument(f"--{name.replace('_', '-')}", type=type(default), default=None)
    p.add_argument("--platforms", nargs="+", choices=["twitter", "youtube", "reddit"])

    p = sub.add_parser("featurize", help="build train/val/test sample matrices")
    _common(p)
    p.add_argument("--platforms", nargs="+", choices=["T", "Y", "R"])
    p.add_argument("--lookback", type=int)

    p = sub.add_parser("train", help="grid-search and fit the volume model")
    _common(p, seed_required=True)
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--search", choices=["per_cell", "global"])

    p = sub.add_parser("forecast", help="forecast test days with the model and baselines")
    _common(p)

    p = sub.add_parser("simulate", help="simulate user-level graphs for test days")
    _common(p, seed_required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--trial-jobs", type=int)

    p = sub.add_parser("evaluate", help="score forecasts and simulations")
    _common(p)

    p = sub.add_parser("report", help="write a markdown digest of the evaluation")
    _common(p)

    p = sub.add_parser("run", help="every stage in order")
    _common(p, seed_required=True)
    p.add_argument("--events")
    return parser


def _config(args) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig.load(args.config) if args.config else pipeline.RunConfig.from_dict({})
    return cfg.with_overrides(**{
        "seed": args.seed,
        "output_dir": args.output_dir,
        "events": getattr(args, "events", None),
        "events_format": getattr(args, "events_format", None),
        "features.platforms": getattr(args, "platforms", None),
        "features.lookback": getattr(args, "lookback", None),
        "gbt.n_jobs": getattr(args, "n_jobs", None),
        "gbt.search": getattr(args, "search", None),
        "simulation.trials": getattr(args, "trials", None),
        "simulation.trial_jobs": getattr(args, "trial_jobs", None),
    })


def _synth(args) -> int:
    fields = {k: getattr(args, k) for k in SynthConfig().to_dict() if getattr(args, k, None) is not None}
    cfg = SynthConfig.from_dict(fields)
    log = synth_generate(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_events_jsonl(log, args.out)
    print(f"wrote {len(log)} events to {args.out}")
    return 0


STAGES = {
    "ingest": pipeline.stage_ingest,
    "featurize": pipeline.stage_featurize,
    "train": pipeline.stage_train,
    "forecast": pipeline.stage_forecast,
    "simulate": pipeline.stage_simulate,
    "evaluate": pipeline.stage_evaluate,
    "report": pipeline.stage_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = _config(args)
        if args.command == "run":
            result = pipeline.run_pipeline(cfg)
            print(f"report bundle written to {result.workspace.root / 'reports'}")
            return 0
        ws = pipeline.Workspace(cfg)
        if args.command == "ingest":
            ws.path("config.echo.json").write_text(cfg.echo())
        out = STAGES[args.command](ws)
        if isinstance(out, Path):
            print(out)
        return 0
    except HourcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
