"""Boundary scorers and global temperature calibration."""
from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import jsonl
from .corpus import BoundarySet, Dialogue
from .seeding import rng_for

DEFAULT_CONTEXT = 4
TEMPERATURE_BOUNDS = (0.05, 20.0)

_TOKEN = re.compile(r"[^\W_]+")


class ScoreKind(enum.Enum):
    LOGIT = "logit"
    PROBABILITY = "probability"


class ScoreFileError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreVector:
    """Scores for candidate positions ``1..T-1`` of one dialogue (stored 0-based)."""

    dialogue_id: str
    scores: tuple[float, ...]
    kind: ScoreKind = ScoreKind.PROBABILITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if any(math.isnan(s) for s in self.scores):
            raise ValueError(f"dialogue {self.dialogue_id!r}: NaN score")
        if self.kind is ScoreKind.PROBABILITY and any(not 0.0 <= s <= 1.0 for s in self.scores):
            raise ValueError(f"dialogue {self.dialogue_id!r}: probability scores must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.scores)


# --------------------------------------------------------------------------
# scorers


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _cosine(a: Counter, b: Counter) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        # Two token-less windows carry no evidence of change; one token-less
        # window shares nothing with the other.
        return 1.0 if na == nb else 0.0
    if len(a) > len(b):
        a, b = b, a
    return sum(v * b[k] for k, v in a.items()) / (na * nb)


def score_lexical_cohesion(d: Dialogue, k: int = DEFAULT_CONTEXT) -> ScoreVector:
    """1 - cosine similarity of term counts in the k messages either side of each gap."""
    if k < 1:
        raise ValueError("context window must be at least 1")
    bags = [Counter(tokenize(m.text)) for m in d.messages]
    T = len(bags)
    scores = []
    for i in range(1, T):
        left = sum((bags[j] for j in range(max(0, i - k), i)), Counter())
        right = sum((bags[j] for j in range(i, min(T, i + k))), Counter())
        sim = _cosine(left, right)
        scores.append(min(1.0, max(0.0, 1.0 - sim)))
    return ScoreVector(d.id, tuple(scores), ScoreKind.PROBABILITY)


def score_random(d: Dialogue, seed: int) -> ScoreVector:
    """Uniform [0, 1) scores keyed on ``(seed, dialogue id)``, independent of corpus order."""
    rng = rng_for(seed, "score-random", d.id)
    return ScoreVector(d.id, tuple(rng.random(d.num_positions)), ScoreKind.PROBABILITY)


def score_constant(d: Dialogue, value: float) -> ScoreVector:
    return ScoreVector(d.id, (float(value),) * d.num_positions, ScoreKind.PROBABILITY)


# --------------------------------------------------------------------------
# score files


def load_scores(path: str | Path, dialogues: Sequence[Dialogue] | None = None) -> dict[str, ScoreVector]:
    """Read ``{id, kind, scores}`` records, validating lengths against ``dialogues``."""
    lengths = {d.id: d.num_positions for d in dialogues} if dialogues is not None else None
    out: dict[str, ScoreVector] = {}
    try:
        records = list(jsonl.read_records(path))
    except jsonl.RecordError as exc:
        raise ScoreFileError(str(exc)) from None
    for line_no, record in records:
        did, kind, scores = record.get("id"), record.get("kind"), record.get("scores")
        where = f"{path}:{line_no}"
        if not isinstance(did, str) or not isinstance(scores, list):
            raise ScoreFileError(f"{where}: score records need 'id' and a 'scores' list")
        try:
            kind_enum = ScoreKind(kind)
        except ValueError:
            raise ScoreFileError(f"{where}: unknown score kind {kind!r}") from None
        if did in out:
            raise ScoreFileError(f"{where}: duplicate scores for dialogue {did!r}")
        if lengths is not None:
            if did not in lengths:
                raise ScoreFileError(f"{where}: unknown dialogue id {did!r}")
            if len(scores) != lengths[did]:
                raise ScoreFileError(
                    f"{where}: dialogue {did!r} has {lengths[did]} candidate positions "
                    f"but {len(scores)} scores"
                )
        if not all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores):
            raise ScoreFileError(f"{where}: dialogue {did!r} has non-numeric scores")
        try:
            out[did] = ScoreVector(did, tuple(scores), kind_enum)
        except ValueError as exc:
            raise ScoreFileError(f"{where}: {exc}") from None
    if lengths is not None:
        missing = [did for did in lengths if did not in out]
        if missing:
            raise ScoreFileError(f"{path}: no scores for dialogue(s) {missing[:5]}")
    return out


def write_scores(path: str | Path, vectors: Sequence[ScoreVector], meta: dict | None = None) -> None:
    jsonl.write_records(
        path,
        ({"id": v.dialogue_id, "kind": v.kind.value, "scores": list(v.scores)} for v in vectors),
        meta=meta,
    )


# --------------------------------------------------------------------------
# temperature scaling


def logistic(z: np.ndarray | float) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def apply_temperature(v: ScoreVector, t: float) -> ScoreVector:
    if v.kind is not ScoreKind.LOGIT:
        raise ValueError("temperature scaling applies to logit scores")
    if not t > 0:
        raise ValueError("temperature must be positive")
    probs = logistic(np.asarray(v.scores) / t)
    return ScoreVector(v.dialogue_id, tuple(probs.tolist()), ScoreKind.PROBABILITY)


def _stack(vectors: Sequence[ScoreVector], golds: Sequence[BoundarySet]) -> tuple[np.ndarray, np.ndarray]:
    if len(vectors) != len(golds):
        raise CalibrationError("need one gold set per score vector")
    logits, labels = [], []
    for v, gold in zip(vectors, golds):
        if v.kind is not ScoreKind.LOGIT:
            raise CalibrationError(f"dialogue {v.dialogue_id!r}: calibration needs logit scores")
        g = set(gold)
        logits.extend(v.scores)
        labels.extend(1.0 if i in g else 0.0 for i in range(1, len(v) + 1))
    return np.asarray(logits), np.asarray(labels)


def _nll(logits: np.ndarray, labels: np.ndarray, t: float) -> float:
    z = logits / t
    # -log sigmoid(z) for positives, -log(1 - sigmoid(z)) for negatives
    return float(np.mean(np.logaddexp(0.0, z) - labels * z))


def binary_nll(vectors: Sequence[ScoreVector], golds: Sequence[BoundarySet], t: float = 1.0) -> float:
    """Mean binary negative log-likelihood of ``logistic(logit / t)`` against gold labels."""
    logits, labels = _stack(vectors, golds)
    if logits.size == 0:
        raise CalibrationError("no candidate positions to evaluate")
    return _nll(logits, labels, t)


def golden_section(f, lo: float, hi: float, rel_tol: float = 1e-4) -> float:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; stop when the bracket is ``rel_tol`` wide."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2


def fit_temperature(
    vectors: Sequence[ScoreVector],
    golds: Sequence[BoundarySet],
    bounds: tuple[float, float] = TEMPERATURE_BOUNDS,
    rel_tol: float = 1e-4,
) -> float:
    """Single global temperature minimizing mean binary NLL.

    Golden-section search over ``log t``; a bracket width of ``rel_tol`` in
    log space is a relative tolerance on ``t``.
    """
    logits, labels = _stack(vectors, golds)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise CalibrationError("calibration needs at least one positive and one negative position")
    log_t = golden_section(
        lambda u: _nll(logits, labels, math.exp(u)),
        math.log(bounds[0]), math.log(bounds[1]), rel_tol,
    )
    return math.exp(log_t)


def score_corpus(
    dialogues: Sequence[Dialogue],
    spec: str,
    *,
    seed: int = 0,
    context: int = DEFAULT_CONTEXT,
    temperature: float | None = None,
) -> dict[str, ScoreVector]:
    """Resolve a scorer spec (``lexical``, ``random``, ``constant:<v>``, ``file:<path>``).

    File-backed logits are converted to probabilities with ``temperature``
    (1.0 when unset) so every selection rule sees probability scores.
    """
    name, _, arg = spec.partition(":")
    if name == "lexical":
        return {d.id: score_lexical_cohesion(d, context) for d in dialogues}
    if name == "random":
        return {d.id: score_random(d, seed) for d in dialogues}
    if name == "constant":
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"constant scorer needs a number, got {arg!r}") from None
        return {d.id: score_constant(d, value) for d in dialogues}
    if name == "file":
        vectors = load_scores(arg, dialogues)
        out = {}
        for did, v in vectors.items():
            if v.kind is ScoreKind.LOGIT:
                v = apply_temperature(v, temperature if temperature is not None else 1.0)
            elif temperature is not None:
                raise ValueError("a temperature can only be applied to logit score files")
            out[did] = v
        return out
    raise ValueError(f"unknown scorer {spec!r}; expected lexical, random, constant:<v> or file:<path>")
