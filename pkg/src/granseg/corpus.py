"""Canonical dialogue corpora and gold boundary derivation.

Boundary indices are 1-based between-message positions: boundary ``i``
separates message ``i`` from message ``i + 1``, so valid indices for a
dialogue of ``T`` messages are ``1..T-1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import jsonl

BoundarySet = tuple[int, ...]
Span = tuple[int, int]


class CorpusError(ValueError):
    """Base class for ingestion and canonicalization failures."""


class ParseError(CorpusError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class EmptyDialogueError(CorpusError):
    def __init__(self, dialogue_id: str):
        self.dialogue_id = dialogue_id
        super().__init__(f"dialogue {dialogue_id!r} has no messages after filtering")


class DerivationError(CorpusError):
    pass


class MergeConflictError(CorpusError):
    pass


@dataclass(frozen=True)
class Message:
    speaker: str
    text: str
    label: str | None = None
    segment_id: int | None = None
    boundary_marker: bool | None = None

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"speaker": self.speaker, "text": self.text}
        if self.label is not None:
            record["label"] = self.label
        if self.segment_id is not None:
            record["segment_id"] = self.segment_id
        if self.boundary_marker is not None:
            record["boundary_marker"] = self.boundary_marker
        return record


@dataclass(frozen=True)
class Dialogue:
    id: str
    messages: tuple[Message, ...]
    gold: BoundarySet = ()

    def __post_init__(self) -> None:
        if not self.messages:
            raise EmptyDialogueError(self.id)
        object.__setattr__(self, "gold", boundary_set(self.gold, len(self.messages)))

    @property
    def num_messages(self) -> int:
        return len(self.messages)

    @property
    def num_positions(self) -> int:
        return len(self.messages) - 1

    def with_gold(self, gold: Iterable[int]) -> Dialogue:
        return replace(self, gold=tuple(gold))


def boundary_set(indices: Iterable[int], num_messages: int) -> BoundarySet:
    """Validate and normalize boundary indices to a sorted unique tuple."""
    out = sorted(set(int(i) for i in indices))
    if out and (out[0] < 1 or out[-1] > num_messages - 1):
        raise ValueError(
            f"boundary indices must lie in 1..{num_messages - 1}, got {out[0]}..{out[-1]}"
        )
    return tuple(out)


class Unit(enum.Enum):
    UTTERANCE = "U"
    SPEAKER_TURN = "T"


class Derivation(enum.Enum):
    SEGMENT_ID_CHANGE = "segment_id"
    BOUNDARY_MARKER = "boundary_marker"
    LABEL_CHANGE = "label"


@dataclass(frozen=True)
class CanonRule:
    """How gold boundaries are read off a dataset's native annotation.

    ``drop_speakers`` removes messages whose speaker label is listed (for
    example a ``"meta"`` pseudo-speaker holding meeting preambles) before any
    grouping or derivation happens.
    """

    derivation: Derivation
    unit: Unit = Unit.UTTERANCE
    drop_speakers: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def parse(cls, derivation: str, unit: str = "U", drop_speakers: Iterable[str] = ()) -> CanonRule:
        aliases = {
            "segment_id": Derivation.SEGMENT_ID_CHANGE,
            "segmentidchange": Derivation.SEGMENT_ID_CHANGE,
            "boundary_marker": Derivation.BOUNDARY_MARKER,
            "boundarymarker": Derivation.BOUNDARY_MARKER,
            "label": Derivation.LABEL_CHANGE,
            "labelchange": Derivation.LABEL_CHANGE,
        }
        units = {"u": Unit.UTTERANCE, "utterance": Unit.UTTERANCE,
                 "t": Unit.SPEAKER_TURN, "speakerturn": Unit.SPEAKER_TURN,
                 "speaker_turn": Unit.SPEAKER_TURN}
        try:
            deriv = aliases[derivation.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown derivation {derivation!r}; expected one of "
                             "segment_id, boundary_marker, label") from None
        try:
            u = units[unit.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown unit {unit!r}; expected U or T") from None
        return cls(deriv, u, frozenset(drop_speakers))

    def describe(self) -> dict[str, Any]:
        return {
            "derivation": self.derivation.value,
            "unit": self.unit.value,
            "drop_speakers": sorted(self.drop_speakers),
        }


# --------------------------------------------------------------------------
# ingestion


def _parse_message(raw: Any, line_no: int, did: str, pos: int) -> Message | None:
    where = f"dialogue {did!r}: message {pos}"
    if not isinstance(raw, dict):
        raise ParseError(line_no, f"{where} is not an object")
    speaker, text = raw.get("speaker"), raw.get("text")
    if not isinstance(speaker, str):
        raise ParseError(line_no, f"{where} lacks a string 'speaker'")
    if not isinstance(text, str):
        raise ParseError(line_no, f"{where} lacks a string 'text'")
    if not text.strip():
        return None

    label = raw.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError(line_no, f"{where}: 'label' must be a string")
    segment_id = raw.get("segment_id")
    if segment_id is not None and (isinstance(segment_id, bool) or not isinstance(segment_id, int)):
        raise ParseError(line_no, f"{where}: 'segment_id' must be an integer")
    marker = raw.get("boundary_marker")
    if marker is not None:
        if marker not in (0, 1) or isinstance(marker, float):
            raise ParseError(line_no, f"{where}: 'boundary_marker' must be 0/1 or a boolean")
        marker = bool(marker)
    return Message(speaker, text, label, segment_id, marker)


def ingest(path: str | Path, format: str = "canonical_jsonl") -> list[Dialogue]:
    """Read a canonical dialogue file.

    Whitespace-only messages are dropped and the remainder reindexed. Any
    ``gold`` field present in the file is ignored; gold comes from
    :func:`derive_gold` or a gold export (:func:`read_gold`).
    """
    if format != "canonical_jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    dialogues: list[Dialogue] = []
    seen: set[str] = set()
    try:
        records = list(jsonl.read_records(path))
    except jsonl.RecordError as exc:
        raise ParseError(exc.line_no, exc.message) from None
    for line_no, record in records:
        did = record.get("id")
        if not isinstance(did, str) or not did:
            raise ParseError(line_no, "missing or non-string 'id'")
        if did in seen:
            raise ParseError(line_no, f"duplicate dialogue id {did!r}")
        raw_messages = record.get("messages")
        if not isinstance(raw_messages, list):
            raise ParseError(line_no, f"dialogue {did!r} is missing a 'messages' list")
        messages = [
            m for pos, raw in enumerate(raw_messages, start=1)
            if (m := _parse_message(raw, line_no, did, pos)) is not None
        ]
        if not messages:
            raise EmptyDialogueError(did)
        seen.add(did)
        dialogues.append(Dialogue(did, tuple(messages)))
    return dialogues


def write_corpus(path: str | Path, dialogues: Sequence[Dialogue], meta: dict | None = None) -> None:
    jsonl.write_records(
        path,
        ({"id": d.id, "messages": [m.to_record() for m in d.messages]} for d in dialogues),
        meta=meta,
    )


def write_gold(path: str | Path, dialogues: Sequence[Dialogue], meta: dict | None = None) -> None:
    jsonl.write_records(
        path,
        ({"id": d.id, "num_messages": d.num_messages, "gold": list(d.gold)} for d in dialogues),
        meta=meta,
    )


def read_gold(path: str | Path) -> dict[str, tuple[int, BoundarySet]]:
    """Read a gold export into ``{id: (num_messages, gold)}``."""
    out: dict[str, tuple[int, BoundarySet]] = {}
    try:
        records = list(jsonl.read_records(path))
    except jsonl.RecordError as exc:
        raise ParseError(exc.line_no, exc.message) from None
    for line_no, record in records:
        did, n, gold = record.get("id"), record.get("num_messages"), record.get("gold")
        if not isinstance(did, str) or not isinstance(n, int) or not isinstance(gold, list):
            raise ParseError(line_no, "gold records need 'id', 'num_messages' and 'gold'")
        try:
            out[did] = (n, boundary_set(gold, n))
        except ValueError as exc:
            raise ParseError(line_no, f"dialogue {did!r}: {exc}") from None
    return out


def attach_gold(dialogues: Sequence[Dialogue], gold: dict[str, tuple[int, BoundarySet]]) -> list[Dialogue]:
    out = []
    for d in dialogues:
        if d.id not in gold:
            raise CorpusError(f"no gold record for dialogue {d.id!r}")
        n, g = gold[d.id]
        if n != d.num_messages:
            raise CorpusError(
                f"dialogue {d.id!r}: gold export has {n} messages, corpus has {d.num_messages}"
            )
        out.append(d.with_gold(g))
    return out


# --------------------------------------------------------------------------
# canonicalization


def _merge_turn(did: str, start: int, run: list[Message]) -> Message:
    first = run[0]
    for attr in ("label", "segment_id"):
        values = {getattr(m, attr) for m in run}
        if len(values) > 1:
            raise MergeConflictError(
                f"dialogue {did!r}: speaker turn starting at message {start} merges "
                f"conflicting {attr} values {sorted(values, key=repr)}"
            )
    # A marker on any non-initial sentence means a segment starts mid-turn.
    if any(m.boundary_marker for m in run[1:]):
        raise MergeConflictError(
            f"dialogue {did!r}: speaker turn starting at message {start} contains a "
            "segment start after its first message"
        )
    return Message(
        speaker=first.speaker,
        text=" ".join(m.text for m in run),
        label=first.label,
        segment_id=first.segment_id,
        boundary_marker=first.boundary_marker,
    )


def group_speaker_turns(d: Dialogue) -> Dialogue:
    """Merge runs of consecutive messages by the same speaker into one turn."""
    merged: list[Message] = []
    run: list[Message] = []
    start = 1
    for pos, msg in enumerate(d.messages, start=1):
        if run and msg.speaker != run[-1].speaker:
            merged.append(_merge_turn(d.id, start, run))
            run, start = [], pos
        run.append(msg)
    merged.append(_merge_turn(d.id, start, run))
    return Dialogue(d.id, tuple(merged))


def _require(d: Dialogue, attr: str) -> list[Any]:
    values = []
    for pos, m in enumerate(d.messages, start=1):
        value = getattr(m, attr)
        if value is None:
            raise DerivationError(f"dialogue {d.id!r}: message {pos} has no {attr}")
        values.append(value)
    return values


def derive_gold(d: Dialogue, rule: CanonRule) -> Dialogue:
    """Apply ``rule`` and return the (possibly regrouped) dialogue with gold set."""
    if rule.drop_speakers:
        kept = tuple(m for m in d.messages if m.speaker not in rule.drop_speakers)
        if not kept:
            raise EmptyDialogueError(d.id)
        d = Dialogue(d.id, kept)
    if rule.unit is Unit.SPEAKER_TURN:
        d = group_speaker_turns(d)

    if rule.derivation is Derivation.BOUNDARY_MARKER:
        markers = _require(d, "boundary_marker")
        gold = [i for i in range(1, d.num_messages) if markers[i]]
    else:
        attr = "segment_id" if rule.derivation is Derivation.SEGMENT_ID_CHANGE else "label"
        values = _require(d, attr)
        gold = [i for i in range(1, d.num_messages) if values[i - 1] != values[i]]
    return d.with_gold(gold)


def segments_of(num_messages: int, boundaries: Iterable[int]) -> list[Span]:
    """Contiguous 1-based inclusive spans induced by ``boundaries``."""
    spans = []
    start = 1
    for b in sorted(boundaries):
        spans.append((start, b))
        start = b + 1
    spans.append((start, num_messages))
    return spans


def corpus_stats(dialogues: Sequence[Dialogue]) -> dict[str, float]:
    n_msgs = sum(d.num_messages for d in dialogues)
    n_gold = sum(len(d.gold) for d in dialogues)
    n_segments = n_gold + len(dialogues)
    return {
        "dialogues": len(dialogues),
        "messages": n_msgs,
        "gold_boundaries": n_gold,
        "mean_segment_length": n_msgs / n_segments if n_segments else 0.0,
    }
