"""Experiment configuration: dataclasses plus a YAML loader.

A config file has the top-level sections ``topology``, ``workload``,
``scheme``, ``controller``, ``estimator`` and ``classifier``, plus the
scalars ``seed``, ``duration_s`` and ``query_class``.  See
``configs/desk_hetero.yaml`` for every key with its meaning.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml

from ..classify import SyntheticClassifierSpec, check_thresholds
from ..estimate import EstimatorConfig
from ..schedule import ControllerConfig
from ..vision import DetectionConfig

SCHEMES = ("surveiledge", "surveiledge_fixed", "edge_only", "cloud_only")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ServiceTime:
    """Shifted lognormal edge inference time: ``gamma + exp(mu + sigma * Z)``."""

    gamma: float = 0.0
    mu: float = -1.0
    sigma: float = 0.3

    def __post_init__(self):
        if self.gamma < 0 or self.sigma < 0:
            raise ConfigError("service time needs gamma >= 0 and sigma >= 0")

    @property
    def mean(self) -> float:
        return self.gamma + math.exp(self.mu + 0.5 * self.sigma**2)


@dataclass(frozen=True)
class Link:
    latency_s: float = 0.0
    bandwidth_Bps: Optional[float] = None  # None: unlimited

    def __post_init__(self):
        if self.latency_s < 0:
            raise ConfigError("link latency must be >= 0")
        if self.bandwidth_Bps is not None and self.bandwidth_Bps <= 0:
            raise ConfigError("link bandwidth must be > 0")

    def serialization(self, nbytes: int) -> float:
        return 0.0 if self.bandwidth_Bps is None else nbytes / self.bandwidth_Bps

    def transfer_time(self, nbytes: int) -> float:
        return self.serialization(nbytes) + self.latency_s


@dataclass(frozen=True)
class EdgeSpec:
    service: ServiceTime = ServiceTime()
    classifier: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None


@dataclass(frozen=True)
class Topology:
    edges: Tuple[EdgeSpec, ...]
    cameras: Tuple[Tuple[str, int], ...]
    edge_link: Link = Link()
    cloud_link: Link = Link(0.05, 1.0e6)
    cloud_infer_time_s: float = 0.05
    cloud_servers: int = 1
    detect_time_s: float = 0.0

    def __post_init__(self):
        if not self.edges:
            raise ConfigError("topology needs at least one edge")
        if not self.cameras:
            raise ConfigError("topology needs at least one camera")
        ids = [c for c, _ in self.cameras]
        if len(set(ids)) != len(ids):
            raise ConfigError("camera ids must be unique")
        for cam, edge in self.cameras:
            if not 0 <= edge < len(self.edges):
                raise ConfigError(f"camera {cam!r} attached to unknown edge {edge}")
        if self.cloud_infer_time_s <= 0 or self.cloud_servers < 1 or self.detect_time_s < 0:
            raise ConfigError("invalid cloud/detection timing")
        if self.cloud_link.bandwidth_Bps is None and self.cloud_link.latency_s == 0:
            raise ConfigError("cloud link needs a latency or bandwidth > 0")

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class RateSchedule:
    """Piecewise-constant arrival rate repeating every ``sum(durations)`` seconds."""

    segments: Tuple[Tuple[float, float], ...] = ((1.0, 0.0),)
    phase_s: float = 0.0

    def __post_init__(self):
        if not self.segments or any(d <= 0 or r < 0 for d, r in self.segments):
            raise ConfigError("rate segments need duration > 0 and rate >= 0")

    @property
    def period_s(self) -> float:
        return sum(d for d, _ in self.segments)

    def rate(self, t: float) -> float:
        u = (t + self.phase_s) % self.period_s
        for duration, rate in self.segments:
            if u < duration:
                return rate
            u -= duration
        return self.segments[-1][1]


@dataclass(frozen=True)
class ByteSize:
    mean: int = 40_000
    jitter: float = 0.0

    def __post_init__(self):
        if self.mean < 1 or not 0 <= self.jitter < 1:
            raise ConfigError("byte size needs mean >= 1 and jitter in [0, 1)")


@dataclass(frozen=True)
class WorkloadSpec:
    rates: Mapping[str, RateSchedule] = field(default_factory=dict)
    default_rate: RateSchedule = RateSchedule()
    positive_fraction: float = 0.2
    negative_labels: Tuple[str, ...] = ("car", "person")
    byte_size: ByteSize = ByteSize()
    sample_interval_s: float = 1.0
    mode: str = "synthetic"
    frames_dir: Optional[str] = None
    detection: DetectionConfig = DetectionConfig()

    def __post_init__(self):
        if not 0 <= self.positive_fraction <= 1:
            raise ConfigError("positive_fraction must be in [0, 1]")
        if self.sample_interval_s <= 0:
            raise ConfigError("sample_interval_s must be > 0")
        if self.mode not in ("synthetic", "frame-replay"):
            raise ConfigError(f"unknown workload mode {self.mode!r}")
        if self.mode == "frame-replay" and not self.frames_dir:
            raise ConfigError("frame-replay mode needs frames_dir")
        if not self.negative_labels:
            raise ConfigError("negative_labels must not be empty")

    def rate_for(self, camera_id: str) -> RateSchedule:
        return self.rates.get(camera_id, self.default_rate)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "surveiledge"
    controller: ControllerConfig = ControllerConfig()
    fixed_alpha: float = 0.8
    fixed_beta: float = 0.1
    initial_alpha: float = 0.8
    edge_only_threshold: float = 0.5
    propagation_delay_s: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        try:
            check_thresholds(self.fixed_alpha, self.fixed_beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.5 <= self.initial_alpha <= 1:
            raise ConfigError("initial_alpha must be in [0.5, 1]")
        if not 0 <= self.edge_only_threshold <= 1:
            raise ConfigError("edge_only_threshold must be in [0, 1]")
        if self.propagation_delay_s < 0:
            raise ConfigError("propagation_delay_s must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    topology: Topology
    workload: WorkloadSpec = WorkloadSpec()
    scheme: SchemeConfig = SchemeConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    classifier: SyntheticClassifierSpec = SyntheticClassifierSpec()
    query_class: str = "moped"
    seed: int = 0
    duration_s: float = 600.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.query_class in self.workload.negative_labels:
            raise ConfigError("query_class must not be one of negative_labels")

    def with_scheme(self, scheme: str) -> "ExperimentConfig":
        return replace(self, scheme=replace(self.scheme, scheme=scheme))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def classifier_for(self, edge: int) -> SyntheticClassifierSpec:
        override = self.topology.edges[edge].classifier
        pos, neg = override if override is not None else (self.classifier.positive_shape, self.classifier.negative_shape)
        return SyntheticClassifierSpec(tuple(pos), tuple(neg), self.seed)


# ---------------------------------------------------------------------------
# YAML loading
# ---------------------------------------------------------------------------


def _take(section: Mapping[str, Any], cls, name: str, **converters):
    """Build ``cls`` from ``section`` rejecting unknown keys."""
    if section is None:
        section = {}
    if not isinstance(section, Mapping):
        raise ConfigError(f"section {name!r} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    kwargs = {}
    for key, value in section.items():
        conv = converters.get(key)
        kwargs[key] = conv(value) if conv else value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _pair(v) -> Tuple[float, float]:
    a, b = v
    return (float(a), float(b))


def _rate(section, name="rate") -> RateSchedule:
    return _take(section, RateSchedule, name, segments=lambda segs: tuple(_pair(s) for s in segs))


def _edge(section, i) -> EdgeSpec:
    section = dict(section or {})
    service = _take(section.pop("service", None), ServiceTime, f"edges[{i}].service")
    classifier = section.pop("classifier", None)
    if section:
        raise ConfigError(f"unknown keys in edges[{i}]: {sorted(section)}")
    if classifier is not None:
        classifier = (_pair(classifier["positive_shape"]), _pair(classifier["negative_shape"]))
    return EdgeSpec(service, classifier)


def _topology(section) -> Topology:
    section = dict(section or {})
    edges = tuple(_edge(e, i) for i, e in enumerate(section.pop("edges", [])))
    cameras = tuple((str(c["id"]), int(c["edge"])) for c in section.pop("cameras", []))
    allowed = {"edge_link", "cloud_link", "cloud_infer_time_s", "cloud_servers", "detect_time_s"}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in 'topology': {sorted(unknown)}")
    for key in ("edge_link", "cloud_link"):
        if key in section:
            section[key] = _take(section[key], Link, key)
    return Topology(edges=edges, cameras=cameras, **section)


def _workload(section) -> WorkloadSpec:
    section = dict(section or {})
    cams = dict(section.pop("cameras", {}) or {})
    default = cams.pop("default", None)
    kwargs: Dict[str, Any] = {"rates": {str(k): _rate(v, f"cameras.{k}") for k, v in cams.items()}}
    if default is not None:
        kwargs["default_rate"] = _rate(default, "cameras.default")
    converters = {
        "byte_size": lambda s: _take(s, ByteSize, "byte_size"),
        "negative_labels": lambda v: tuple(str(x) for x in v),
        "detection": lambda s: _take(s, DetectionConfig, "detection", aspect_ratio_bounds=_pair),
    }
    wl = _take(section, WorkloadSpec, "workload", **converters)
    return replace(wl, **kwargs)


def config_from_dict(doc: Mapping[str, Any], base_dir: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a mapping")
    doc = dict(doc)
    allowed = {"topology", "workload", "scheme", "controller", "estimator", "classifier", "query_class", "seed", "duration_s"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "topology" not in doc:
        raise ConfigError("missing 'topology' section")
    try:
        topology = _topology(doc["topology"])
        workload = _workload(doc.get("workload"))
        if workload.frames_dir and base_dir and not os.path.isabs(workload.frames_dir):
            workload = replace(workload, frames_dir=os.path.join(base_dir, workload.frames_dir))
        controller_doc = dict(doc.get("controller") or {})
        scheme_doc = dict(doc.get("scheme") or {})
        if "name" in scheme_doc:
            scheme_doc["scheme"] = scheme_doc.pop("name")
        for key in ("initial_alpha", "propagation_delay_s"):
            if key in controller_doc:
                scheme_doc[key] = controller_doc.pop(key)
        controller_doc.setdefault("sample_interval_s", workload.sample_interval_s)
        controller = _take(controller_doc, ControllerConfig, "controller")
        scheme = _take(scheme_doc, SchemeConfig, "scheme")
        scheme = replace(scheme, controller=controller)
        estimator = _take(doc.get("estimator"), EstimatorConfig, "estimator")
        classifier = _take(
            doc.get("classifier"), SyntheticClassifierSpec, "classifier", positive_shape=_pair, negative_shape=_pair
        )
        return ExperimentConfig(
            topology=topology,
            workload=workload,
            scheme=scheme,
            estimator=estimator,
            classifier=classifier,
            query_class=str(doc.get("query_class", "moped")),
            seed=int(doc.get("seed", 0)),
            duration_s=float(doc.get("duration_s", 600.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return config_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))
