"""Append-only line-delimited metrics and event logs.

Every line is one self-contained JSON record. Three record kinds share
metrics.log: {"type": "round", ...}, {"type": "eval", ...} and
{"type": "event", ...}; events.log additionally holds just the event
records so a run can be replayed from it directly.

Wall-clock dependent fields (wall_clock, steps_per_sec) are excluded by
canonical_lines(), which is what determinism comparisons run on.
"""

from __future__ import annotations

import json
import os

VOLATILE_FIELDS = ("wall_clock", "steps_per_sec")


class IoError(Exception):
    """Filesystem failure while appending to a run log."""


class MetricsWriter:
    """Appends one JSON record per line, flushing eagerly.

    Flush-per-line keeps the log complete after a crash; these files see a
    few lines per second at most.
    """

    def __init__(self, path: str):
        self._path = path
        try:
            self._fh = open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot open {path}: {exc}") from exc

    @property
    def path(self) -> str:
        return self._path

    def append(self, record: dict) -> None:
        try:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()
        except (OSError, ValueError) as exc:
            raise IoError(f"cannot append to {self._path}: {exc}") from exc

    def close(self) -> None:
        try:
            self._fh.close()
        except OSError as exc:
            raise IoError(f"cannot close {self._path}: {exc}") from exc

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()


def read_records(path: str) -> list[dict]:
    """Parse every line independently; raises on any malformed line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IoError(f"{path}:{line_no}: malformed record: {exc}") from exc
    return records


def strip_volatile(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in VOLATILE_FIELDS}


def canonical_lines(path: str) -> list[str]:
    """Deterministic rendering of a log for byte-wise comparison."""
    return [
        json.dumps(strip_volatile(record), sort_keys=True)
        for record in read_records(path)
    ]


def ensure_run_dir(run_dir: str) -> None:
    os.makedirs(os.path.join(run_dir, "checkpoints"), exist_ok=True)
