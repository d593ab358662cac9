"""Command-line front end.

Exit codes: 0 success, 2 usage/config error, 1 runtime failure.  Errors are
reported as one line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import estimate, profiling, vision
from .sim import SCHEMES, ConfigError, EventTrace, SummaryRow, compare_schemes, load_config, metrics_from_trace, run, summary_csv


class UsageError(Exception):
    """Bad invocation; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="edgequery", description="Cloud-edge video query simulator and tools.")
    sub = p.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="simulate one scheme and write its trace and summary")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--scheme", choices=SCHEMES)
    r.add_argument("--force", action="store_true", help="overwrite existing outputs")

    c = sub.add_parser("compare", help="run all four schemes over a list of seeds")
    c.add_argument("--config", required=True)
    c.add_argument("--seeds", type=_seeds, help="comma-separated, e.g. 1,2,3 (default: the config seed)")
    c.add_argument("--out", help="output directory (default: summary CSV on stdout)")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--force", action="store_true")

    d = sub.add_parser("detect", help="frame-difference detection over a directory of PGM/PPM frames")
    d.add_argument("--frames", required=True)
    d.add_argument("--config", help="take the workload.detection section from this config")
    d.add_argument("--threshold", type=int)

    f = sub.add_parser("fit", help="fit a shifted lognormal to a latency CSV (column latency_s)")
    f.add_argument("--input", required=True)
    f.add_argument("--blend-weight", type=float, default=0.5)

    k = sub.add_parser("cluster", help="profile and cluster cameras from a camera_id,label CSV")
    k.add_argument("--input", required=True)
    k.add_argument("--k", type=int, default=2)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--max-iters", type=int, default=100)
    k.add_argument("--out", help="write the JSON here instead of stdout")
    k.add_argument("--force", action="store_true")

    y = sub.add_parser("replay", help="recompute the summary of a stored trace")
    y.add_argument("--trace", required=True)
    y.add_argument("--scheme", help="row label (default: taken from the trace file name)")
    y.add_argument("--out", help="write the summary CSV here instead of stdout")
    y.add_argument("--force", action="store_true")
    return p


def _writable(path: Path, force: bool) -> Path:
    if path.exists() and not force:
        raise UsageError(f"refusing to overwrite {path} (use --force)")
    return path


def _emit(text: str, out: Optional[str], force: bool) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = _writable(Path(out), force)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def trace_name(scheme: str) -> str:
    return f"{scheme}.trace.jsonl"


def cmd_run(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.scheme:
        cfg = cfg.with_scheme(args.scheme)
    out = Path(args.out)
    scheme = cfg.scheme.scheme
    trace_path = _writable(out / trace_name(scheme), args.force)
    summary_path = _writable(out / f"{scheme}.summary.csv", args.force)
    trace, metrics = run(cfg)
    out.mkdir(parents=True, exist_ok=True)
    trace.write(trace_path)
    text = summary_csv([SummaryRow.from_runs(scheme, [metrics])])
    summary_path.write_text(text)
    sys.stdout.write(text)


def cmd_compare(args) -> None:
    cfg = load_config(args.config)
    seeds = args.seeds or [cfg.seed]
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    paths = {}
    if args.out:
        out = Path(args.out)
        paths = {name: _writable(out / name, args.force) for name in ("summary.csv", "summary_by_seed.csv", "latencies.csv")}
    comparison = compare_schemes(cfg, seeds, jobs=args.jobs)
    text = summary_csv(comparison.summary())
    sys.stdout.write(text)
    if not paths:
        return
    out.mkdir(parents=True, exist_ok=True)
    paths["summary.csv"].write_text(text)
    with open(paths["summary_by_seed.csv"], "w", newline="") as fh:
        fh.write("seed," + summary_csv([]).strip() + "\n")
        for seed, row in comparison.per_seed():
            fh.write(f"{seed},{row.to_csv()}\n")
    with open(paths["latencies.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "seed", "pkg", "latency_s"])
        for scheme, runs in comparison.runs.items():
            for seed, m in zip(comparison.seeds, runs):
                for pkg in sorted(m.latencies):
                    w.writerow([scheme, seed, pkg, repr(m.latencies[pkg])])


def cmd_detect(args) -> None:
    cfg = vision.DetectionConfig()
    if args.config:
        cfg = load_config(args.config).workload.detection
    if args.threshold is not None:
        try:
            cfg = vision.DetectionConfig(**{**cfg.__dict__, "threshold": args.threshold})
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise UsageError(f"no such frame directory: {frames_dir}")
    try:
        frames = vision.load_frame_sequence(frames_dir, interval_s=cfg.sample_interval_s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(frames) < 3:
        raise UsageError(f"{frames_dir}: need at least 3 frames, found {len(frames)}")
    sys.stdout.write("frame,x,y,w,h\n")
    for k, boxes in enumerate(vision.detect_sequence(frames, cfg), start=1):
        for b in boxes:
            sys.stdout.write(f"{k},{b.x},{b.y},{b.w},{b.h}\n")


def read_latency_csv(path: str) -> List[float]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["latency_s"]:
            raise UsageError(f"{path}: expected a single 'latency_s' header column")
        try:
            return [float(row[0]) for row in reader if row and row[0].strip()]
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from None


def cmd_fit(args) -> None:
    samples = read_latency_csv(args.input)
    fit = estimate.fit_lognormal3(samples)
    cfg = estimate.EstimatorConfig(blend_weight=args.blend_weight)
    print(f"gamma={fit.gamma!r}")
    print(f"mu={fit.mu!r}")
    print(f"sigma={fit.sigma!r}")
    print(f"n={fit.n}")
    print(f"three_param={str(fit.three_param).lower()}")
    print(f"predicted_s={estimate.predict(fit, cfg)!r}")


def cmd_cluster(args) -> None:
    try:
        observations = profiling.read_observations(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    profiles = profiling.build_profile(observations)
    try:
        assignment = profiling.kmeans(profiles, args.k, seed=args.seed, max_iters=args.max_iters)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(profiling.assignment_to_json(assignment) + "\n", args.out, args.force)


def scheme_from_trace_path(path: str) -> str:
    name = Path(path).name
    for scheme in sorted(SCHEMES, key=len, reverse=True):
        if name.startswith(scheme + "."):
            return scheme
    return "replay"


def cmd_replay(args) -> None:
    if not Path(args.trace).is_file():
        raise UsageError(f"no such trace file: {args.trace}")
    try:
        trace = EventTrace.read(args.trace)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{args.trace}: malformed trace ({exc})") from None
    scheme = args.scheme or scheme_from_trace_path(args.trace)
    text = summary_csv([SummaryRow.from_runs(scheme, [metrics_from_trace(trace)])])
    _emit(text, args.out, args.force)


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "detect": cmd_detect,
    "fit": cmd_fit,
    "cluster": cmd_cluster,
    "replay": cmd_replay,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.verb](args)
    except (UsageError, ConfigError) as exc:
        print(f"edgequery: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - top-level guard
        print(f"edgequery: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
