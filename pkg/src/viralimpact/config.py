"""INI-style run and scenario configuration.

Example::

    [run]
    inputs = posts_fb.csv, posts_yt.csv
    output = out
    seed = 7
    jobs = 2
    emit = json, csv, svg

    [platforms]
    instagram = facebook-like

    [detection]
    threshold_facebook = 3.0
    threshold_youtube = 2.5
    min_posts_per_source = 30
    smoothing = plus-one

    [impact]
    alpha = 0.05
    overlap_policy = exclude-event
    strict_sign = false

    [sampler]
    n_draws = 1000
    burn_in = 200
    seasonal = false

Scenario files for ``simulate`` use ``[scenario]`` plus one ``[event.<name>]``
section per injected event.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Any

from viralimpact import ssm
from viralimpact.causal import ImpactConfig, OverlapPolicy
from viralimpact.domain import Platform
from viralimpact.metrics import DetectionConfig, Smoothing
from viralimpact.synth import InjectedEvent, ScenarioSpec

EMIT_CHOICES = ("json", "csv", "svg")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    inputs: list[Path] = field(default_factory=list)
    platform_map: dict[str, Platform] = field(default_factory=dict)
    detection: DetectionConfig = DetectionConfig()
    impact: ImpactConfig = ImpactConfig()
    strict_sign: bool = False
    seed: int = 0
    jobs: int = 1
    output: Path = Path("out")
    emit: tuple[str, ...] = ("json", "csv")

    def validate(self, need_inputs: bool = True) -> "RunConfig":
        if need_inputs and not self.inputs:
            raise ConfigError("no input files configured")
        for p in self.inputs:
            if not p.is_file():
                raise ConfigError(f"input file not found: {p}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        bad = set(self.emit) - set(EMIT_CHOICES)
        if bad:
            raise ConfigError(f"unknown emit flags: {sorted(bad)}")
        return self

    def snapshot(self) -> dict[str, Any]:
        """JSON-friendly view; input paths by file name so reports stay portable."""
        sampler = self.impact.sampler
        return {
            "inputs": [p.name for p in self.inputs],
            "platform_map": {k: v.value for k, v in sorted(self.platform_map.items())},
            "detection": {
                "threshold_facebook": self.detection.threshold_facebook,
                "threshold_youtube": self.detection.threshold_youtube,
                "min_posts_per_source": self.detection.min_posts_per_source,
                "smoothing": self.detection.smoothing.value,
            },
            "impact": {
                "alpha": self.impact.alpha,
                "overlap_policy": self.impact.overlap_policy.value,
                "strict_sign": self.strict_sign,
            },
            "sampler": {
                "n_draws": sampler.n_draws,
                "burn_in": sampler.burn_in,
                "seasonal": sampler.seasonal,
                "priors": asdict(sampler.priors),
            },
            "seed": self.seed,
            "emit": list(self.emit),
        }


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def _read(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parser


def _typed(section: configparser.SectionProxy, key: str, kind, default):
    if key not in section:
        return default
    raw = section[key].strip()
    try:
        if kind is bool:
            return section.getboolean(key)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def load_run_config(path: str | Path | None, **overrides) -> RunConfig:
    """Parse a run config; keyword overrides (seed, jobs, output) win when not None."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        parser = _read(path)
        base = path.parent
        try:
            cfg = _from_parser(parser, base)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, Path(value) if key == "output" else value)
    return cfg


RUN_KEYS = {
    "run": {"inputs", "output", "seed", "jobs", "emit"},
    "detection": {"threshold_facebook", "threshold_youtube", "min_posts_per_source",
                  "smoothing"},
    "impact": {"alpha", "overlap_policy", "strict_sign"},
    "sampler": {"n_draws", "burn_in", "seasonal"},
    "priors": {f.name for f in fields(ssm.Priors)},
}


def _check_keys(parser: configparser.ConfigParser, allowed: dict[str, set[str]]) -> None:
    for name in parser.sections():
        if name in allowed:
            unknown = set(parser[name]) - allowed[name]
            if unknown:
                raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")


def _from_parser(parser: configparser.ConfigParser, base: Path) -> RunConfig:
    known = set(RUN_KEYS) | {"platforms", "scenario"}
    for name in parser.sections():
        if name not in known and not name.startswith("event."):
            raise ConfigError(f"unknown config section [{name}]")
    _check_keys(parser, RUN_KEYS)
    for name in ("run", "detection", "impact", "sampler"):
        if not parser.has_section(name):
            parser.add_section(name)
    run = parser["run"]
    inputs = [(base / p) if not Path(p).is_absolute() else Path(p)
              for p in _split(run.get("inputs", ""))]
    output = Path(run.get("output", "out").strip())
    output = output if output.is_absolute() else base / output
    platform_map = {}
    if parser.has_section("platforms"):
        for label, value in parser["platforms"].items():
            platform_map[label.lower()] = Platform.parse(value)

    det = parser["detection"]
    detection = DetectionConfig(
        threshold_facebook=_typed(det, "threshold_facebook", float, 3.0),
        threshold_youtube=_typed(det, "threshold_youtube", float, 2.5),
        min_posts_per_source=_typed(det, "min_posts_per_source", int, 30),
        smoothing=Smoothing(det.get("smoothing", "plus-one").strip()),
    )
    priors = ssm.Priors()
    if parser.has_section("priors"):
        sec = parser["priors"]
        priors = ssm.Priors(**{f.name: _typed(sec, f.name, float, getattr(priors, f.name))
                               for f in fields(ssm.Priors)})
    sec = parser["sampler"]
    sampler = ssm.SamplerSettings(
        n_draws=_typed(sec, "n_draws", int, 1000),
        burn_in=_typed(sec, "burn_in", int, 200),
        seasonal=_typed(sec, "seasonal", bool, False),
        priors=priors)
    if sampler.n_draws < 1 or sampler.burn_in < 0:
        raise ConfigError("sampler needs n_draws >= 1 and burn_in >= 0")
    sec = parser["impact"]
    impact = ImpactConfig(
        alpha=_typed(sec, "alpha", float, 0.05),
        overlap_policy=OverlapPolicy(sec.get("overlap_policy", "exclude-event").strip()),
        sampler=sampler)
    return RunConfig(
        inputs=inputs, platform_map=platform_map, detection=detection, impact=impact,
        strict_sign=_typed(sec, "strict_sign", bool, False),
        seed=_typed(run, "seed", int, 0), jobs=_typed(run, "jobs", int, 1),
        output=output, emit=tuple(_split(run.get("emit", "json, csv"))))


def load_scenario(path: str | Path, seed: int | None = None) -> ScenarioSpec:
    """Parse ``[scenario]`` and ``[event.*]`` sections into a ScenarioSpec."""
    parser = _read(Path(path))
    if not parser.has_section("scenario"):
        raise ConfigError(f"{path} has no [scenario] section")
    _check_keys(parser, {"scenario": {f.name for f in fields(ScenarioSpec)} - {"events"}})
    for name in parser.sections():
        if name.startswith("event."):
            _check_keys(parser, {name: {"source", "day", "shape", "magnitude", "duration"}})
    sec = parser["scenario"]
    defaults = ScenarioSpec()
    kwargs: dict[str, Any] = {}
    try:
        for f in fields(ScenarioSpec):
            if f.name in ("events", "trend_slopes", "start", "platform") or f.name not in sec:
                continue
            kind = type(getattr(defaults, f.name))
            kwargs[f.name] = _typed(sec, f.name, kind, getattr(defaults, f.name))
        if "trend_slopes" in sec:
            kwargs["trend_slopes"] = tuple(float(v) for v in _split(sec["trend_slopes"]))
        if "start" in sec:
            kwargs["start"] = date.fromisoformat(sec["start"].strip())
        if "platform" in sec:
            kwargs["platform"] = Platform.parse(sec["platform"])
        events = []
        for name in parser.sections():
            if name.startswith("event."):
                ev = parser[name]
                events.append(InjectedEvent(
                    source=_typed(ev, "source", int, 0), day=_typed(ev, "day", int, 0),
                    shape=ev.get("shape", "step").strip(),
                    magnitude=_typed(ev, "magnitude", float, 0.0),
                    duration=_typed(ev, "duration", int, 0)))
        kwargs["events"] = tuple(events)
        if seed is not None:
            kwargs["seed"] = seed
        return ScenarioSpec(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid scenario {path}: {exc}") from exc


def dump_scenario(spec: ScenarioSpec) -> str:
    """Inverse of ``load_scenario``."""
    lines = ["[scenario]"]
    for f in fields(ScenarioSpec):
        value = getattr(spec, f.name)
        if f.name == "events":
            continue
        if f.name == "trend_slopes":
            value = ", ".join(repr(v) for v in value)
        elif f.name == "platform":
            value = value.value
        elif f.name == "start":
            value = value.isoformat()
        lines.append(f"{f.name} = {value}")
    for i, ev in enumerate(spec.events):
        lines += ["", f"[event.{i}]", f"source = {ev.source}", f"day = {ev.day}",
                  f"shape = {ev.shape}", f"magnitude = {ev.magnitude!r}",
                  f"duration = {ev.duration}"]
    return "\n".join(lines) + "\n"
