"""Line-delimited JSON helpers shared by every file format in the package.

All writers may emit a leading ``{"_meta": {...}}`` record carrying the run
configuration and input hashes. Readers skip such records transparently.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator

META_KEY = "_meta"


class RecordError(ValueError):
    """A line could not be decoded into a JSON object."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        self.message = message
        super().__init__(f"{path}:{line_no}: {message}")


def read_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, record)`` pairs, skipping blank and meta lines."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(path, line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise RecordError(path, line_no, "expected a JSON object")
            if META_KEY in record:
                continue
            yield line_no, record


def write_records(
    path: str | Path,
    records: Iterable[dict[str, Any]],
    meta: dict[str, Any] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta is not None:
            fh.write(dumps({META_KEY: meta}) + "\n")
        for record in records:
            fh.write(dumps(record) + "\n")


def dumps(obj: Any) -> str:
    # Stable key order and separators keep outputs byte-reproducible.
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def file_sha256(*paths: str | Path | None) -> str:
    digest = hashlib.sha256()
    for path in paths:
        if path is None:
            continue
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()
