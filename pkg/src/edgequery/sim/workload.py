"""Turn a workload spec into the list of detected image packages."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Dict, List

import numpy as np

from .. import vision
from ..classify import ImagePackage
from .config import ConfigError, ExperimentConfig


def tick_count(duration_s: float, interval_s: float) -> int:
    """Number of sampling ticks ``k * interval`` strictly before ``duration``."""
    return max(0, math.ceil(duration_s / interval_s - 1e-12))


def synthetic_packages(cfg: ExperimentConfig) -> List[ImagePackage]:
    wl = cfg.workload
    s = wl.sample_interval_s
    n_ticks = tick_count(cfg.duration_s, s)
    rng = np.random.default_rng(cfg.seed)
    ticks = np.arange(n_ticks)
    drafts = []  # (tick, camera order, object order, label, size)
    for cam_idx, (camera_id, _) in enumerate(cfg.topology.cameras):
        sched = wl.rate_for(camera_id)
        lam = np.array([sched.rate(k * s) * s for k in ticks])
        counts = rng.poisson(lam) if n_ticks else np.zeros(0, dtype=int)
        total = int(counts.sum())
        is_query = rng.random(total) < wl.positive_fraction
        other = rng.integers(0, len(wl.negative_labels), size=total)
        u = rng.random(total)
        sizes = np.maximum(1, np.rint(wl.byte_size.mean * (1.0 + wl.byte_size.jitter * (2.0 * u - 1.0)))).astype(int)
        obj_ticks = np.repeat(ticks, counts)
        for j in range(total):
            label = cfg.query_class if is_query[j] else wl.negative_labels[other[j]]
            drafts.append((int(obj_ticks[j]), cam_idx, j, label, int(sizes[j])))
    drafts.sort()
    return [
        ImagePackage(pid, cfg.topology.cameras[cam][0], tick * s, size, label)
        for pid, (tick, cam, _, label, size) in enumerate(drafts)
    ]


def _frame_labels(camera_dir: Path) -> Dict[int, List[str]]:
    path = camera_dir / "labels.csv"
    labels: Dict[int, List[str]] = {}
    if not path.exists():
        return labels
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"frame", "label"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: expected header 'frame,label'")
        for row in reader:
            labels.setdefault(int(row["frame"]), []).append(row["label"].strip())
    return labels


def replay_packages(cfg: ExperimentConfig) -> List[ImagePackage]:
    """Run frame-difference detection over stored frames.

    Layout: ``frames_dir/<camera_id>/*.pgm|*.ppm`` (filename order is capture
    order, one file per sampling tick) plus an optional ``labels.csv``
    (``frame,label``) naming the class of each detected box of a frame in
    box order; unlabelled boxes get ``background``.  A tick needs its
    neighbours on both sides, so tick 0 never detects and every tick before
    ``duration_s`` must have a following frame.
    """
    wl = cfg.workload
    s = wl.sample_interval_s
    n_ticks = tick_count(cfg.duration_s, s)
    root = Path(wl.frames_dir)
    drafts = []
    for cam_idx, (camera_id, _) in enumerate(cfg.topology.cameras):
        cam_dir = root / camera_id
        if not cam_dir.is_dir():
            raise ConfigError(f"missing frame directory {cam_dir}")
        paths = sorted(p for p in cam_dir.iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
        if len(paths) < n_ticks + 1:
            raise ConfigError(f"{cam_dir}: {n_ticks} ticks need {n_ticks + 1} frames, found {len(paths)}")
        try:
            frames = [vision.read_pnm(p, camera_id, k * s) for k, p in enumerate(paths[: n_ticks + 1])]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        labels = _frame_labels(cam_dir)
        for k in range(1, n_ticks):
            boxes = vision.detect(frames[k - 1], frames[k], frames[k + 1], wl.detection)
            names = labels.get(k, [])
            for j, box in enumerate(boxes):
                label = names[j] if j < len(names) else "background"
                size = box.w * box.h * frames[k].channels
                drafts.append((k, cam_idx, j, label, size, box))
    drafts.sort(key=lambda d: d[:3])
    return [
        ImagePackage(pid, cfg.topology.cameras[cam][0], tick * s, size, label, box)
        for pid, (tick, cam, _, label, size, box) in enumerate(drafts)
    ]


def generate_packages(cfg: ExperimentConfig) -> List[ImagePackage]:
    if cfg.workload.mode == "frame-replay":
        return replay_packages(cfg)
    return synthetic_packages(cfg)


def ready_time(pkg: ImagePackage, cfg: ExperimentConfig) -> float:
    """When a package leaves the detector.

    Replayed frames are only diffable once the following frame exists, one
    interval after capture.
    """
    delay = cfg.topology.detect_time_s
    if cfg.workload.mode == "frame-replay":
        delay += cfg.workload.sample_interval_s
    return pkg.capture_time + delay
