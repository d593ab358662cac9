"""Event trace records and their JSON-lines encoding."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Union

KINDS = ("detect", "dispatch", "enqueue", "infer_start", "infer_end", "upload_start", "upload_end", "verdict")
CLOUD = -1  # ``dev`` value for records produced by the cloud


@dataclass(frozen=True)
class TraceRecord:
    t: float
    kind: str
    pkg: int
    dev: int
    extra: Dict[str, Any]

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "pkg": self.pkg, "dev": self.dev, "extra": self.extra}, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "TraceRecord":
        d = json.loads(line)
        if d.get("kind") not in KINDS:
            raise ValueError(f"unknown trace record kind {d.get('kind')!r}")
        return cls(float(d["t"]), d["kind"], int(d["pkg"]), int(d["dev"]), dict(d.get("extra") or {}))


class EventTrace:
    def __init__(self, records: Iterable[TraceRecord] = ()):
        self.records: List[TraceRecord] = list(records)

    def add(self, t: float, kind: str, pkg: int, dev: int, **extra) -> None:
        self.records.append(TraceRecord(t, kind, pkg, dev, extra))

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, kind: str) -> List[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(r.to_json())
                fh.write("\n")

    @classmethod
    def read(cls, path: Union[str, os.PathLike]) -> "EventTrace":
        with open(path) as fh:
            return cls(TraceRecord.from_json(line) for line in fh if line.strip())
