"""Deterministic discrete-event simulation of cameras, edges, links and cloud."""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from .. import kernels
from ..classify import Decision, ImagePackage, cloud_classify, confidences, decide
from ..estimate import LatencyEstimator
from ..schedule import EdgeState, ParameterStore, dispatch, on_feedback, on_queue_change, update_beta
from .config import SCHEMES, ExperimentConfig
from .metrics import FScoreParams, RunMetrics, SummaryRow
from .trace import CLOUD, EventTrace
from .workload import generate_packages, ready_time

SERVICE_STREAM = 2


@dataclass
class _Edge:
    queue: deque
    busy: Optional[ImagePackage] = None
    uplink_free_at: float = 0.0

    @property
    def q(self) -> int:
        return len(self.queue) + (self.busy is not None)


class Simulation:
    """One run of one scheme.

    Events are ordered by ``(time, insertion sequence)``; nothing else
    (dict order, wall clock, hash seeds) influences the result.
    """

    def __init__(self, cfg: ExperimentConfig, packages: Optional[Sequence[ImagePackage]] = None):
        self.cfg = cfg
        self.scheme = cfg.scheme.scheme
        self.packages = list(generate_packages(cfg) if packages is None else packages)
        self.home = {cam: edge for cam, edge in cfg.topology.cameras}
        self.trace = EventTrace()
        self.metrics = RunMetrics()
        self.now = 0.0
        self._heap: list = []
        self._seq = itertools.count()
        n_edges = cfg.topology.n_edges
        self.edges = [_Edge(deque()) for _ in range(n_edges)]
        self.cloud_queue: deque = deque()
        self.cloud_free = cfg.topology.cloud_servers

        ids = np.array([p.package_id for p in self.packages], dtype=np.int64)
        self._index = {int(pid): i for i, pid in enumerate(ids)}
        self._is_query = np.array([p.true_label == cfg.query_class for p in self.packages], dtype=bool)
        z = ndtri(kernels.keyed_uniform(cfg.seed, ids, SERVICE_STREAM)) if len(ids) else np.zeros(0)
        self._service = [
            e.service.gamma + np.exp(e.service.mu + e.service.sigma * z) for e in cfg.topology.edges
        ]
        self._conf_cache: Dict[tuple, np.ndarray] = {}

        self.store: Optional[ParameterStore] = None
        self.estimators: List[LatencyEstimator] = []
        if self.scheme == "surveiledge":
            ctrl = cfg.scheme.controller
            a0 = cfg.scheme.initial_alpha
            states = [
                EdgeState(i, 0, cfg.estimator.initial_t, a0, update_beta(a0, ctrl)) for i in range(n_edges)
            ]
            self.store = ParameterStore(states, cfg.scheme.propagation_delay_s)
            self.estimators = [LatencyEstimator(cfg.estimator) for _ in range(n_edges)]

    # -- event plumbing ----------------------------------------------------

    def _at(self, t: float, handler, *args) -> None:
        heapq.heappush(self._heap, (t, next(self._seq), handler, args))

    def run(self) -> Tuple[EventTrace, RunMetrics]:
        for pkg in self.packages:
            self._at(ready_time(pkg, self.cfg), self._detect, pkg)
        while self._heap:
            t, _, handler, args = heapq.heappop(self._heap)
            self.now = t
            handler(*args)
        return self.trace, self.metrics

    # -- per-package model ---------------------------------------------------

    def confidence(self, pkg: ImagePackage, device: int) -> float:
        spec = self.cfg.classifier_for(device)
        key = (spec.positive_shape, spec.negative_shape)
        table = self._conf_cache.get(key)
        if table is None:
            ids = [p.package_id for p in self.packages]
            table = self._conf_cache[key] = confidences(ids, self._is_query, spec)
        return float(table[self._index[pkg.package_id]])

    def service_time(self, pkg: ImagePackage, device: int) -> float:
        return float(self._service[device][self._index[pkg.package_id]])

    # -- handlers ----------------------------------------------------------

    def _detect(self, pkg: ImagePackage) -> None:
        home = self.home[pkg.camera_id]
        self.metrics.detected += 1
        truth = bool(self._is_query[self._index[pkg.package_id]])
        self.trace.add(
            self.now, "detect", pkg.package_id, home,
            camera=pkg.camera_id, capture=pkg.capture_time, label=pkg.true_label, truth=truth, bytes=pkg.byte_size,
        )
        if self.scheme == "cloud_only":
            self._upload(pkg, home)
            return
        target = home
        if self.scheme == "surveiledge":
            target = dispatch(self.store.view(home, self.now))
        self.trace.add(self.now, "dispatch", pkg.package_id, target, origin=home)
        delay = self.cfg.topology.edge_link.transfer_time(pkg.byte_size) if target != home else 0.0
        if delay > 0:
            self._at(self.now + delay, self._enqueue, pkg, target)
        else:
            self._enqueue(pkg, target)

    def _enqueue(self, pkg: ImagePackage, device: int) -> None:
        edge = self.edges[device]
        edge.queue.append(pkg)
        q = edge.q
        self.trace.add(self.now, "enqueue", pkg.package_id, device, q=q)
        self.metrics.queue_series.setdefault(device, []).append((self.now, q))
        if self.store is not None:
            on_queue_change(self.store, device, q, self.cfg.scheme.controller, self.now)
        if edge.busy is None:
            self._start(device)

    def _start(self, device: int) -> None:
        edge = self.edges[device]
        pkg = edge.queue.popleft()
        edge.busy = pkg
        self.trace.add(self.now, "infer_start", pkg.package_id, device)
        duration = self.service_time(pkg, device)
        self._at(self.now + duration, self._infer_end, pkg, device, duration)

    def _thresholds(self, device: int) -> Tuple[float, float]:
        if self.scheme == "surveiledge":
            st = self.store.local(device)
            return st.alpha, st.beta
        if self.scheme == "surveiledge_fixed":
            return self.cfg.scheme.fixed_alpha, self.cfg.scheme.fixed_beta
        thr = self.cfg.scheme.edge_only_threshold
        return thr, thr

    def _infer_end(self, pkg: ImagePackage, device: int, duration: float) -> None:
        edge = self.edges[device]
        edge.busy = None
        q = edge.q
        f = self.confidence(pkg, device)
        alpha, beta = self._thresholds(device)
        if self.scheme == "edge_only":
            decision = Decision.POSITIVE if f > alpha else Decision.NEGATIVE
        else:
            decision = decide(f, alpha, beta).decision
        self.trace.add(
            self.now, "infer_end", pkg.package_id, device,
            q=q, f=f, service=duration, decision=decision.value, alpha=alpha, beta=beta,
        )
        self.metrics.queue_series.setdefault(device, []).append((self.now, q))
        if self.store is not None:
            on_feedback(self.store, device, duration, q, self.cfg.scheme.controller, self.now, self.estimators[device])
        if decision is Decision.UNCERTAIN:
            self._upload(pkg, device)
        else:
            self._finalize(pkg, device, decision is Decision.POSITIVE, "edge")
        if edge.queue:
            self._start(device)

    def _upload(self, pkg: ImagePackage, device: int) -> None:
        edge = self.edges[device]
        link = self.cfg.topology.cloud_link
        start = max(self.now, edge.uplink_free_at)
        edge.uplink_free_at = start + link.serialization(pkg.byte_size)
        self._at(start, self._upload_start, pkg, device)

    def _upload_start(self, pkg: ImagePackage, device: int) -> None:
        self.trace.add(self.now, "upload_start", pkg.package_id, device, bytes=pkg.byte_size)
        self._at(self.now + self.cfg.topology.cloud_link.transfer_time(pkg.byte_size), self._upload_end, pkg, device)

    def _upload_end(self, pkg: ImagePackage, device: int) -> None:
        self.trace.add(self.now, "upload_end", pkg.package_id, device, bytes=pkg.byte_size)
        self.metrics.upload_bytes += pkg.byte_size
        if self.cloud_free > 0:
            self._cloud_start(pkg)
        else:
            self.cloud_queue.append(pkg)

    def _cloud_start(self, pkg: ImagePackage) -> None:
        self.cloud_free -= 1
        self._at(self.now + self.cfg.topology.cloud_infer_time_s, self._cloud_done, pkg)

    def _cloud_done(self, pkg: ImagePackage) -> None:
        self.cloud_free += 1
        verdict = cloud_classify(pkg, self.cfg.query_class)
        self._finalize(pkg, CLOUD, verdict.positive, "cloud")
        if self.cloud_queue:
            self._cloud_start(self.cloud_queue.popleft())

    def _finalize(self, pkg: ImagePackage, device: int, positive: bool, by: str) -> None:
        self.trace.add(self.now, "verdict", pkg.package_id, device, decision="positive" if positive else "negative", by=by)
        self.metrics.latencies[pkg.package_id] = self.now - pkg.capture_time
        self.metrics.record_verdict(positive, bool(self._is_query[self._index[pkg.package_id]]))


def run(cfg: ExperimentConfig, packages: Optional[Sequence[ImagePackage]] = None) -> Tuple[EventTrace, RunMetrics]:
    return Simulation(cfg, packages).run()


def _run_metrics(cfg: ExperimentConfig) -> RunMetrics:
    return run(cfg)[1]


@dataclass
class Comparison:
    seeds: List[int]
    runs: Dict[str, List[RunMetrics]]

    def summary(self, params: FScoreParams = FScoreParams()) -> List[SummaryRow]:
        return [SummaryRow.from_runs(s, self.runs[s], params) for s in SCHEMES]

    def per_seed(self, params: FScoreParams = FScoreParams()) -> List[Tuple[int, SummaryRow]]:
        return [(seed, SummaryRow.from_runs(s, [self.runs[s][i]], params)) for i, seed in enumerate(self.seeds) for s in SCHEMES]


def compare_schemes(cfg: ExperimentConfig, seeds: Sequence[int], jobs: int = 1) -> Comparison:
    """Run all four schemes on the same workload realisation for each seed."""
    if not seeds:
        raise ValueError("need at least one seed")
    seeds = [int(s) for s in seeds]
    configs = [cfg.with_seed(seed).with_scheme(s) for seed in seeds for s in SCHEMES]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_metrics, configs))
    else:
        results = []
        for seed in seeds:
            seeded = cfg.with_seed(seed)
            packages = generate_packages(seeded)
            results.extend(run(seeded.with_scheme(s), packages)[1] for s in SCHEMES)
    runs = {s: [] for s in SCHEMES}
    for c, m in zip(configs, results):
        runs[c.scheme.scheme].append(m)
    return Comparison(seeds, runs)
