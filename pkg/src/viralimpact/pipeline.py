"""End-to-end orchestration: ingest -> detect -> impact -> persist -> report."""

from __future__ import annotations

import json
import logging
import math
import time
from importlib import resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from viralimpact import __version__, causal, persistency
from viralimpact.config import ConfigError, RunConfig
from viralimpact.domain import SourceTimeline
from viralimpact.ingest import IngestError, IngestReport, file_digest, ingest
from viralimpact.metrics import EngagementSeries, SourceDetection, detect_sources, engagement_series

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
REPORT_FILES = ("detection.json", "impacts.json", "persistency.json",
                "correlations.json", "flows.json")

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_COMPUTE, EXIT_IO = 0, 2, 3, 4, 5


class ComputeError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class OutputError(Exception):
    pass


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, IngestError):
        return EXIT_INGEST
    if isinstance(exc, ComputeError):
        return EXIT_COMPUTE
    if isinstance(exc, (OutputError, OSError)):
        return EXIT_IO
    return EXIT_COMPUTE


def _clean(obj):
    """Make a structure strict-JSON safe: NaN/inf -> None, numpy -> Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(out_dir: Path, name: str, doc: dict) -> Path:
    path = out_dir / name
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(doc), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def load_schema(document: str) -> dict:
    """JSON Schema shipped for a stage document (detection, impacts, ..., manifest)."""
    ref = resources.files("viralimpact") / "schemas" / f"{document}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def read_json(out_dir: Path, name: str) -> dict:
    path = out_dir / name
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path} missing; run the earlier stage first") from None


# --- detection ---------------------------------------------------------------

@dataclass
class DetectionStage:
    detections: list[SourceDetection]
    series: dict[str, EngagementSeries]
    events: list[tuple[str, str, int]]          # (source_id, post_id, day offset)

    @property
    def platform_of(self) -> dict[str, str]:
        return {d.source_id: d.platform.value for d in self.detections}


def run_detection(timelines: Iterable[SourceTimeline], cfg: RunConfig) -> DetectionStage:
    timelines = {t.source_id: t for t in timelines}
    detections = detect_sources(timelines.values(), cfg.detection)
    series, events = {}, []
    for det in detections:
        tl = timelines[det.source_id]
        viral_ids = [m.post_id for m in det.viral]
        es = engagement_series(tl, cfg.detection.smoothing, viral_ids)
        series[det.source_id] = es
        day_of = {p.post_id: es.grid.day_index(p.timestamp) for p in tl.posts}
        events += [(det.source_id, pid, day_of[pid]) for pid in sorted(viral_ids)]
    return DetectionStage(detections, series, sorted(events))


ZSCORE_BINS = np.round(np.arange(-6.0, 20.0 + 1e-9, 0.25), 2)


def _zscore_histograms(detections: list[SourceDetection], cfg: RunConfig) -> list[dict]:
    out = []
    for platform in sorted({d.platform for d in detections}, key=lambda p: p.value):
        ms = [m for d in detections if d.platform is platform for m in d.metrics]
        theta = cfg.detection.threshold_for(platform)
        entry = {"platform": platform.value, "threshold": theta,
                 "bin_edges": ZSCORE_BINS.tolist(), "metrics": {}}
        for metric, other in (("z_spreading", "z_total_interactions"),
                              ("z_total_interactions", "z_spreading")):
            z = np.array([getattr(m, metric) for m in ms])
            zo = np.array([getattr(m, other) for m in ms])
            counts, _ = np.histogram(np.clip(z, ZSCORE_BINS[0], ZSCORE_BINS[-1]), ZSCORE_BINS)
            above = z > theta
            entry["metrics"][metric] = {
                "counts": counts.tolist(),
                "above_threshold_viral": int(np.count_nonzero(above & (zo > theta))),
                "above_threshold_non_viral": int(np.count_nonzero(above & ~(zo > theta))),
            }
        out.append(entry)
    return out


def detection_document(stage: DetectionStage, cfg: RunConfig) -> dict:
    sources = []
    for det in stage.detections:
        es = stage.series[det.source_id]
        sources.append({
            "source_id": det.source_id,
            "platform": det.platform.value,
            "n_posts": len(det.metrics),
            "n_viral": len(det.viral),
            "excluded_reason": det.excluded_reason,
            "first_day": es.grid.start.isoformat(),
            "n_days": es.grid.length,
        })
    metrics = {(d.source_id, m.post_id): m for d in stage.detections for m in d.viral}
    events = []
    for s, p, d in stage.events:
        m = metrics[(s, p)]
        events.append({"source_id": s, "post_id": p, "day": d,
                       "date": stage.series[s].grid.date_at(d).isoformat(),
                       "spreading": m.spreading, "total_interactions": m.total_interactions,
                       "z_spreading": m.z_spreading,
                       "z_total_interactions": m.z_total_interactions})
    return {"schema_version": SCHEMA_VERSION, "document": "detection",
            "config": cfg.snapshot()["detection"], "sources": sources,
            "viral_events": events,
            "zscore_histograms": _zscore_histograms(stage.detections, cfg)}


# --- impact ------------------------------------------------------------------

def _impact_task(args):
    series, day, post_id, impact_cfg, seed = args
    return list(causal.run_all_windows(series, day, post_id, impact_cfg, seed).values())


def run_impacts(stage: DetectionStage, cfg: RunConfig) -> list[causal.ImpactResult]:
    tasks = [(stage.series[s], d, p, cfg.impact, cfg.seed) for s, p, d in stage.events]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_impact_task, tasks))
    else:
        chunks = [_impact_task(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    return sorted(results, key=lambda r: (r.source_id, r.post_id, r.n_weeks))


def impacts_document(results: list[causal.ImpactResult], cfg: RunConfig) -> dict:
    snap = cfg.snapshot()
    return {"schema_version": SCHEMA_VERSION, "document": "impacts",
            "alpha": cfg.impact.alpha, "overlap_policy": cfg.impact.overlap_policy.value,
            "sampler": snap["sampler"], "seed": cfg.seed,
            "results": [r.to_dict() for r in results]}


# --- persistency / correlation / flows ----------------------------------------

def group_by_event(results: Iterable[causal.ImpactResult]):
    events: dict[tuple[str, str], dict[int, causal.ImpactResult]] = {}
    for r in results:
        events.setdefault((r.source_id, r.post_id), {})[r.n_weeks] = r
    return dict(sorted(events.items()))


EXTRAPOLATED_K = (0, 1)


def persistency_documents(results: list[causal.ImpactResult], platform_of: dict[str, str],
                          cfg: RunConfig) -> tuple[dict, dict, dict]:
    events = group_by_event(results)
    platforms = sorted(set(platform_of.values()))
    per_platform, flows = [], []
    for platform in platforms:
        ev = {k: v for k, v in events.items() if platform_of[k[0]] == platform}
        timelines = [persistency.effect_timeline(v, cfg.impact.alpha, cfg.strict_sign)
                     for v in ev.values()]
        matrix = persistency.persistency_matrix(timelines)
        entry: dict[str, Any] = {"platform": platform, "n_events": len(ev),
                                 "timelines": [t.to_dict() for t in timelines],
                                 "matrix": matrix.to_dict(), "decay_fit": None,
                                 "decay_fit_error": None, "curves": []}
        try:
            fit = persistency.fit_decay(matrix)
        except persistency.UnderdeterminedFitError as exc:
            entry["decay_fit_error"] = str(exc)
        else:
            entry["decay_fit"] = fit.to_dict()
            for k in EXTRAPOLATED_K + persistency.EMERGENCE_WEEKS:
                hs = list(range(max(k, 1), causal.WINDOW_WEEKS[-1] + 1))
                entry["curves"].append({
                    "k": k, "extrapolated": k in EXTRAPOLATED_K, "h": hs,
                    "phi": fit.evaluate(k, hs).tolist()})
        per_platform.append(entry)
        paths = [{n: (None if r.excluded else r.classification) for n, r in v.items()}
                 for v in ev.values()]
        flows.append({"platform": platform, "flow": persistency.effect_flow(paths).to_dict()})
    table = persistency.correlation_table(results, platform_of)
    persist_doc = {"schema_version": SCHEMA_VERSION, "document": "persistency",
                   "alpha": cfg.impact.alpha, "strict_sign": cfg.strict_sign,
                   "platforms": per_platform}
    corr_doc = {"schema_version": SCHEMA_VERSION, "document": "correlations",
                "table": [c.to_dict() for c in table]}
    flow_doc = {"schema_version": SCHEMA_VERSION, "document": "flows", "platforms": flows}
    return persist_doc, corr_doc, flow_doc


def results_from_document(doc: dict) -> list[causal.ImpactResult]:
    return [causal.ImpactResult.from_dict(r) for r in doc["results"]]


def platform_map_from_detection(doc: dict) -> dict[str, str]:
    return {s["source_id"]: s["platform"] for s in doc["sources"]}


# --- full run ----------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    inputs: dict[str, str]
    tool_version: str = __version__
    timings: dict[str, float] = field(default_factory=dict)
    counts: dict[str, Any] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    status: str = "ok"
    failed_stage: str | None = None

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "document": "manifest",
                "tool_version": self.tool_version, "config": self.config,
                "inputs": self.inputs, "timings": self.timings, "counts": self.counts,
                "diagnostics": self.diagnostics, "status": self.status,
                "failed_stage": self.failed_stage}


def reconcile_counts(stage: DetectionStage, results: list[causal.ImpactResult],
                     report: IngestReport | None = None) -> dict:
    reasons: dict[str, int] = {}
    per_window = {}
    for n in causal.WINDOW_WEEKS:
        rs = [r for r in results if r.n_weeks == n]
        excluded = [r for r in rs if r.excluded]
        for r in excluded:
            reasons[r.reason] = reasons.get(r.reason, 0) + 1
        per_window[str(n)] = {"classified": len(rs) - len(excluded), "excluded": len(excluded)}
        if per_window[str(n)]["classified"] + per_window[str(n)]["excluded"] != len(stage.events):
            raise ComputeError("impact", f"window {n} results do not reconcile with events")
    return {
        "sources": len(stage.detections),
        "sources_excluded": sum(d.excluded_reason is not None for d in stage.detections),
        "posts": report.n_posts if report else None,
        "rows_rejected": len(report.errors) if report else 0,
        "viral_events": len(stage.events),
        "windows": per_window,
        "excluded_reasons": dict(sorted(reasons.items())),
    }


def run(cfg: RunConfig) -> RunManifest:
    """Execute every stage and write all artifacts into ``cfg.output``.

    On a stage failure a manifest naming the stage is still written before
    the exception propagates.
    """
    cfg.validate()
    out = Path(cfg.output)
    manifest = RunManifest(cfg.snapshot(), {p.name: file_digest(p) for p in cfg.inputs})
    stage_name = "ingest"
    try:
        t0 = time.perf_counter()
        report = ingest(cfg.inputs, cfg.platform_map)
        manifest.diagnostics += [str(e) for e in report.errors] + report.warnings
        manifest.timings["ingest"] = time.perf_counter() - t0

        stage_name = "detect"
        t0 = time.perf_counter()
        try:
            detection = run_detection(report.timelines, cfg)
        except (ValueError, ArithmeticError) as exc:
            raise ComputeError("detect", str(exc)) from exc
        manifest.timings["detect"] = time.perf_counter() - t0

        stage_name = "impact"
        t0 = time.perf_counter()
        try:
            results = run_impacts(detection, cfg)
        except (ValueError, ArithmeticError) as exc:
            raise ComputeError("impact", str(exc)) from exc
        manifest.timings["impact"] = time.perf_counter() - t0
        manifest.counts = reconcile_counts(detection, results, report)

        stage_name = "persist"
        t0 = time.perf_counter()
        try:
            docs = persistency_documents(results, detection.platform_of, cfg)
        except (ValueError, ArithmeticError, AssertionError) as exc:
            raise ComputeError("persist", str(exc)) from exc
        manifest.timings["persist"] = time.perf_counter() - t0

        stage_name = "report"
        t0 = time.perf_counter()
        all_docs = dict(zip(REPORT_FILES, (detection_document(detection, cfg),
                                           impacts_document(results, cfg)) + docs))
        emit_reports(out, all_docs, cfg.emit)
        manifest.timings["report"] = time.perf_counter() - t0
    except Exception as exc:
        manifest.status = "failed"
        manifest.failed_stage = getattr(exc, "stage", stage_name)
        manifest.diagnostics.append(str(exc))
        try:
            write_json(out, "manifest.json", manifest.to_dict())
        except OutputError:
            pass
        raise
    write_json(out, "manifest.json", manifest.to_dict())
    return manifest


def emit_reports(out: Path, docs: dict[str, dict], emit: Iterable[str]) -> None:
    from viralimpact import reports

    emit = set(emit)
    if "json" in emit:
        for name, doc in docs.items():
            write_json(out, name, doc)
    if "csv" in emit:
        reports.write_tables(out, docs)
    if "svg" in emit:
        reports.write_plots(out, docs)
