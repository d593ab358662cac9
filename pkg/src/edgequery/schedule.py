"""Task allocation and adaptive thresholds over a replicated parameter store."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

from .estimate import LatencyEstimator, update_fast

ALPHA_MIN, ALPHA_MAX = 0.5, 1.0
# thresholds this close to a clamp bound are snapped onto it, so a run of
# equal-size steps does not stall one ulp short of the bound
SNAP_EPS = 1e-9


@dataclass(frozen=True)
class EdgeState:
    device_id: int
    queue_len: int = 0
    est_infer_time: float = 0.1
    alpha: float = 0.8
    beta: float = 0.1

    @property
    def load(self) -> float:
        return self.queue_len * self.est_infer_time


@dataclass(frozen=True)
class ControllerConfig:
    gamma1: float = 0.01
    gamma2: float = 0.5
    sample_interval_s: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma1 < 1:
            raise ValueError("gamma1 must be in (0, 1)")
        if not 0 < self.gamma2 < 1:
            raise ValueError("gamma2 must be in (0, 1)")
        if self.sample_interval_s <= 0:
            raise ValueError("sample_interval_s must be > 0")


def dispatch(states: Sequence[EdgeState]) -> int:
    """Index of the device with the least ``Q_i * t_i`` (lowest index on ties)."""
    if not states:
        raise ValueError("no edge devices to dispatch to")
    best, best_load = 0, states[0].load
    for i in range(1, len(states)):
        load = states[i].load
        if load < best_load:
            best, best_load = i, load
    return best


def update_alpha(alpha_old: float, queue_len: int, infer_time: float, cfg: ControllerConfig) -> float:
    alpha = alpha_old - cfg.gamma1 * (queue_len * infer_time - cfg.sample_interval_s)
    alpha = max(min(alpha, ALPHA_MAX), ALPHA_MIN)
    if alpha - ALPHA_MIN < SNAP_EPS:
        return ALPHA_MIN
    if ALPHA_MAX - alpha < SNAP_EPS:
        return ALPHA_MAX
    return alpha


def update_beta(alpha_new: float, cfg: ControllerConfig) -> float:
    if not ALPHA_MIN <= alpha_new <= ALPHA_MAX:
        raise ValueError(f"alpha must be in [0.5, 1], got {alpha_new}")
    return cfg.gamma2 * (1.0 - alpha_new)


class ParameterStore:
    """Per-device replicas of every device's :class:`EdgeState`.

    A write lands on the writer's own replica at once and on every other
    replica ``propagation_delay`` seconds later.  Replicas resolve
    conflicting writes per ``(device, field)`` by last writer wins, ordered
    by ``(write time, write sequence)``.  Callers drive time forward with
    :meth:`advance` (reads advance implicitly).
    """

    FIELDS = ("queue_len", "est_infer_time", "alpha", "beta")

    def __init__(self, states: Sequence[EdgeState], propagation_delay: float = 0.0):
        if propagation_delay < 0:
            raise ValueError("propagation_delay must be >= 0")
        self.n = len(states)
        self.propagation_delay = propagation_delay
        self.now = 0.0
        self._replicas: List[List[EdgeState]] = [list(states) for _ in range(self.n)]
        # stamp[replica][device][field] -> (time, seq) of the value held
        self._stamps = [[{f: (-1.0, -1) for f in self.FIELDS} for _ in range(self.n)] for _ in range(self.n)]
        self._pending: list = []
        self._seq = itertools.count()

    def _check(self, device: int) -> None:
        if not 0 <= device < self.n:
            raise KeyError(f"unknown device {device}")

    def _apply(self, replica: int, device: int, stamp, values: Dict[str, float]) -> None:
        held = self._stamps[replica][device]
        fresh = {f: v for f, v in values.items() if stamp > held[f]}
        if fresh:
            for f in fresh:
                held[f] = stamp
            self._replicas[replica][device] = replace(self._replicas[replica][device], **fresh)

    def advance(self, now: float) -> None:
        if now < self.now:
            raise ValueError("store time cannot move backwards")
        self.now = now
        while self._pending and self._pending[0][0] <= now:
            _, stamp, replica, device, values = heapq.heappop(self._pending)
            self._apply(replica, device, stamp, values)

    def write(self, device: int, now: Optional[float] = None, **values) -> None:
        self._check(device)
        unknown = set(values) - set(self.FIELDS)
        if unknown:
            raise KeyError(f"unknown fields {sorted(unknown)}")
        if now is not None:
            self.advance(now)
        stamp = (self.now, next(self._seq))
        self._apply(device, device, stamp, values)
        for replica in range(self.n):
            if replica == device:
                continue
            if self.propagation_delay == 0:
                self._apply(replica, device, stamp, values)
            else:
                heapq.heappush(self._pending, (self.now + self.propagation_delay, stamp, replica, device, values))

    def local(self, device: int) -> EdgeState:
        """Device's authoritative view of its own state."""
        self._check(device)
        return self._replicas[device][device]

    def view(self, replica: int, now: Optional[float] = None) -> List[EdgeState]:
        """Snapshot of all device states as seen from ``replica``."""
        self._check(replica)
        if now is not None:
            self.advance(now)
        return list(self._replicas[replica])

    def replicas_agree(self) -> bool:
        first = self._replicas[0]
        return all(r == first for r in self._replicas[1:])

    @property
    def pending(self) -> int:
        return len(self._pending)


def _retune(store: ParameterStore, device: int, queue_len: int, infer_time: float, cfg: ControllerConfig, now) -> None:
    alpha = update_alpha(store.local(device).alpha, queue_len, infer_time, cfg)
    store.write(device, now, queue_len=queue_len, alpha=alpha, beta=update_beta(alpha, cfg))


def on_queue_change(store: ParameterStore, device: int, new_Q: int, cfg: ControllerConfig, now: Optional[float] = None) -> ParameterStore:
    """Record a new queue length; the change re-tunes the device's thresholds."""
    store._check(device)
    if new_Q < 0:
        raise ValueError("queue length must be >= 0")
    _retune(store, device, new_Q, store.local(device).est_infer_time, cfg, now)
    return store


def on_feedback(
    store: ParameterStore,
    device: int,
    observed_t: float,
    new_Q: int,
    cfg: ControllerConfig,
    now: Optional[float] = None,
    estimator: Optional[LatencyEstimator] = None,
) -> ParameterStore:
    """Apply a classifier feedback: update t_d and Q_d, then alpha_d and beta_d.

    Without an ``estimator`` the inference-time estimate moves by one
    :func:`update_fast` step; with one, the estimator's own state (fast
    update plus periodic lognormal re-fit) supplies the new value.
    """
    store._check(device)
    if new_Q < 0:
        raise ValueError("queue length must be >= 0")
    if estimator is not None:
        t = estimator.observe(observed_t)
    else:
        t = update_fast(store.local(device).est_infer_time, observed_t)
    store.write(device, now, est_infer_time=t)
    _retune(store, device, new_Q, t, cfg, None)
    return store
