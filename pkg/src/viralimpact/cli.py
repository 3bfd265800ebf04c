"""Command-line entry point: ``viralimpact <verb> [--config FILE] [--seed N] [--jobs N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from viralimpact import pipeline
from viralimpact.config import ConfigError, dump_scenario, load_run_config, load_scenario
from viralimpact.ingest import ingest, write_posts

logger = logging.getLogger("viralimpact")


def _load(args, need_inputs=True):
    cfg = load_run_config(args.config, seed=args.seed, jobs=args.jobs, output=args.out)
    return cfg.validate(need_inputs=need_inputs)


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = ingest(cfg.inputs, cfg.platform_map)
    for err in report.errors:
        print(f"error: {err}")
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"{report.n_rows} rows, {report.n_posts} valid posts, "
          f"{len(report.timelines)} sources, {len(report.errors)} rejected")
    return pipeline.EXIT_INGEST if report.errors else pipeline.EXIT_OK


def _detect(cfg):
    report = ingest(cfg.inputs, cfg.platform_map)
    try:
        return pipeline.run_detection(report.timelines, cfg)
    except ValueError as exc:
        raise pipeline.ComputeError("detect", str(exc)) from exc


def cmd_detect(args) -> int:
    cfg = _load(args)
    stage = _detect(cfg)
    pipeline.write_json(cfg.output, "detection.json", pipeline.detection_document(stage, cfg))
    print(f"{len(stage.events)} viral posts in {len(stage.detections)} sources")
    return pipeline.EXIT_OK


def cmd_impact(args) -> int:
    cfg = _load(args)
    stage = _detect(cfg)
    try:
        results = pipeline.run_impacts(stage, cfg)
    except ValueError as exc:
        raise pipeline.ComputeError("impact", str(exc)) from exc
    pipeline.write_json(cfg.output, "detection.json", pipeline.detection_document(stage, cfg))
    pipeline.write_json(cfg.output, "impacts.json", pipeline.impacts_document(results, cfg))
    done = sum(not r.excluded for r in results)
    print(f"{len(stage.events)} events, {done} windows estimated, "
          f"{len(results) - done} excluded")
    return pipeline.EXIT_OK


def cmd_persist(args) -> int:
    cfg = _load(args, need_inputs=False)
    detection = pipeline.read_json(cfg.output, "detection.json")
    impacts = pipeline.read_json(cfg.output, "impacts.json")
    results = pipeline.results_from_document(impacts)
    try:
        docs = pipeline.persistency_documents(
            results, pipeline.platform_map_from_detection(detection), cfg)
    except (ValueError, AssertionError) as exc:
        raise pipeline.ComputeError("persist", str(exc)) from exc
    for name, doc in zip(pipeline.REPORT_FILES[2:], docs):
        pipeline.write_json(cfg.output, name, doc)
    return pipeline.EXIT_OK


def cmd_report(args) -> int:
    cfg = _load(args, need_inputs=False)
    docs = {name: pipeline.read_json(cfg.output, name) for name in pipeline.REPORT_FILES}
    pipeline.emit_reports(cfg.output, docs, set(cfg.emit) - {"json"})
    return pipeline.EXIT_OK


def cmd_simulate(args) -> int:
    if args.config is None:
        raise ConfigError("simulate needs --config pointing at a scenario file")
    from viralimpact import synth

    spec = load_scenario(args.config, seed=args.seed)
    out = Path(args.out or "sim")
    try:
        posts, truth = synth.generate(spec)
    except synth.GenerationError as exc:
        raise pipeline.ComputeError("simulate", str(exc)) from exc
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_posts(out / "posts.csv", posts)
        (out / "scenario.ini").write_text(dump_scenario(spec), encoding="utf-8")
        (out / "run.ini").write_text(
            "[run]\ninputs = posts.csv\noutput = results\n"
            f"seed = {spec.seed}\n", encoding="utf-8")
    except OSError as exc:
        raise pipeline.OutputError(str(exc)) from exc
    pipeline.write_json(out, "ground_truth.json", truth.to_dict())
    print(f"{len(posts)} posts, {len(truth.events)} injected events -> {out}")
    return pipeline.EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    manifest = pipeline.run(cfg)
    c = manifest.counts
    print(f"{c['sources']} sources, {c['viral_events']} viral events -> {cfg.output}")
    return pipeline.EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check config and input files"),
    "detect": (cmd_detect, "compute metrics and flag viral posts"),
    "impact": (cmd_impact, "estimate per-event impacts for every window"),
    "persist": (cmd_persist, "emergence, persistency, decay fit, correlations, flows"),
    "report": (cmd_report, "CSV tables and SVG figures from stage outputs"),
    "simulate": (cmd_simulate, "generate a synthetic scenario"),
    "run": (cmd_run, "full pipeline"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config (scenario file for simulate)")
    common.add_argument("--seed", type=int, help="global seed, overrides the config")
    common.add_argument("--jobs", type=int, help="worker processes for the impact stage")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="viralimpact", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except Exception as exc:
        code = pipeline.exit_code_for(exc)
        stage = getattr(exc, "stage", args.command)
        print(f"viralimpact {args.command}: [{stage}] {exc}", file=sys.stderr)
        if args.verbose:
            logger.exception("failure")
        return code


if __name__ == "__main__":
    sys.exit(main())
