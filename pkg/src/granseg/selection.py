"""Boundary selection: static threshold+gap NMS, adaptive controller, baselines."""
from __future__ import annotations

import bisect
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import jsonl
from .corpus import BoundarySet, Dialogue, boundary_set
from .scoring import ScoreVector
from .seeding import rng_for

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.50
DEFAULT_GAP = 3


class ConfigError(ValueError):
    pass


def _too_close(accepted: list[int], i: int, g: int) -> bool:
    """``accepted`` is sorted; check only the neighbours around ``i``."""
    k = bisect.bisect_left(accepted, i)
    if k < len(accepted) and accepted[k] - i < g:
        return True
    return k > 0 and i - accepted[k - 1] < g


# --------------------------------------------------------------------------
# static rule


@dataclass(frozen=True)
class StaticRule:
    tau: float = DEFAULT_TAU
    g: int = DEFAULT_GAP

    def __post_init__(self) -> None:
        if self.g < 1:
            raise ConfigError("minimum spacing g must be at least 1")


def candidates(scores: Sequence[float], tau: float) -> list[int]:
    """1-based positions whose score clears ``tau``."""
    return [i for i, s in enumerate(scores, start=1) if s >= tau]


def select_static(scores: Sequence[float] | ScoreVector, tau: float = DEFAULT_TAU, g: int = DEFAULT_GAP) -> BoundarySet:
    """Threshold at ``tau`` then greedy NMS with minimum spacing ``g``.

    Candidates are visited by descending score; equal scores go to the
    smaller index first.
    """
    if isinstance(scores, ScoreVector):
        scores = scores.scores
    if g < 1:
        raise ConfigError("minimum spacing g must be at least 1")
    order = sorted(candidates(scores, tau), key=lambda i: (-scores[i - 1], i))
    accepted: list[int] = []
    for i in order:
        if not _too_close(accepted, i, g):
            bisect.insort(accepted, i)
    return tuple(accepted)


# --------------------------------------------------------------------------
# adaptive controller


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of the evidence-accumulating controller.

    ``max_age`` bounds how many steps a candidate may accumulate before it is
    retired uncommitted (``None`` accumulates forever). Positions scoring
    below ``candidate_threshold`` count as processed but never become active.
    """

    rho: float
    g: int = DEFAULT_GAP
    window: int = 200
    eta: float = 0.05
    tau0: float = DEFAULT_TAU
    max_age: int | None = 4
    candidate_threshold: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.rho < 1:
            raise ConfigError("target rate rho must lie in (0, 1)")
        if self.g < 1:
            raise ConfigError("minimum spacing g must be at least 1")
        if self.window < 1:
            raise ConfigError("rate window must be at least 1")
        if self.eta < 0 or math.isnan(self.eta):
            raise ConfigError("step size eta must be non-negative")
        if self.max_age is not None and self.max_age < 1:
            raise ConfigError("max_age must be at least 1")


def update_threshold(tau: float, eta: float, rate_hat: float, rho: float) -> float:
    return tau + eta * (rate_hat - rho)


@dataclass(frozen=True)
class TraceRow:
    t: int
    tau: float
    candidates_seen: int
    committed: int


@dataclass
class _Candidate:
    score: float
    evidence: float = 0.0
    age: int = 0


@dataclass
class SelectionTrace:
    committed: BoundarySet
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def tau_history(self) -> list[tuple[int, float]]:
        return [(r.t, r.tau) for r in self.rows]

    @property
    def candidate_count(self) -> int:
        return self.rows[-1].candidates_seen if self.rows else 0

    @property
    def commit_count(self) -> int:
        return self.rows[-1].committed if self.rows else 0


class AdaptiveSelector:
    """Online selection state for one session.

    Each :meth:`step` is one time step: the positions becoming available are
    appended, every active candidate gains its frozen score as evidence, and
    candidates are visited by descending evidence (then index) so that
    stronger signals commit first. The threshold then moves toward the target
    rate. ``C`` counts processed candidate positions, each once.
    """

    def __init__(self, cfg: AdaptiveConfig):
        self.cfg = cfg
        self.tau = cfg.tau0
        self.t = 0
        self.processed = 0
        self.selected = 0
        self._recent: deque[tuple[int, int]] = deque()
        self._recent_processed = 0
        self._recent_commits = 0
        self._negative_logged = False
        self.rows: list[TraceRow] = [TraceRow(0, self.tau, 0, 0)]
        self.begin_dialogue()

    def begin_dialogue(self) -> None:
        """Start a new position sequence; threshold and rate history carry over."""
        self._active: dict[int, _Candidate] = {}
        self._committed: list[int] = []
        self._next_pos = 1

    @property
    def committed(self) -> BoundarySet:
        return tuple(self._committed)

    def step(self, new_scores: Sequence[float] = ()) -> list[int]:
        cfg = self.cfg
        for s in new_scores:
            pos = self._next_pos
            self._next_pos += 1
            if cfg.candidate_threshold is None or s >= cfg.candidate_threshold:
                self._active[pos] = _Candidate(float(s))
        n_new = len(new_scores)
        self.processed += n_new

        for cand in self._active.values():
            cand.evidence += cand.score
            cand.age += 1
        commits: list[int] = []
        for i in sorted(self._active, key=lambda i: (-self._active[i].evidence, i)):
            cand = self._active[i]
            if _too_close(self._committed, i, cfg.g):
                del self._active[i]
            elif cand.evidence >= self.tau:
                bisect.insort(self._committed, i)
                commits.append(i)
                del self._active[i]
            elif cfg.max_age is not None and cand.age >= cfg.max_age:
                del self._active[i]
        self.selected += len(commits)

        self._recent.append((n_new, len(commits)))
        self._recent_processed += n_new
        self._recent_commits += len(commits)
        while self._recent and self._recent_processed - self._recent[0][0] >= cfg.window:
            old_n, old_c = self._recent.popleft()
            self._recent_processed -= old_n
            self._recent_commits -= old_c
        if self._recent_processed > 0:
            rate_hat = self._recent_commits / self._recent_processed
            self.tau = update_threshold(self.tau, cfg.eta, rate_hat, cfg.rho)
            if self.tau < 0 and not self._negative_logged:
                log.warning("adaptive threshold went negative (%.4f) at t=%d", self.tau, self.t + 1)
                self._negative_logged = True

        self.t += 1
        self.rows.append(TraceRow(self.t, self.tau, self.processed, self.selected))
        return commits


def select_adaptive(
    scores: Sequence[float] | ScoreVector,
    cfg: AdaptiveConfig,
    step_size: int | None = 1,
) -> SelectionTrace:
    """Stream ``scores`` through a fresh controller.

    ``step_size`` positions become available per time step; ``None`` makes
    the whole vector available at once (offline use).
    """
    if isinstance(scores, ScoreVector):
        scores = scores.scores
    scores = list(scores)
    sel = AdaptiveSelector(cfg)
    chunk = len(scores) if step_size is None else step_size
    if chunk < 1 and scores:
        raise ConfigError("step_size must be positive")
    for start in range(0, len(scores), max(chunk, 1)):
        sel.step(scores[start:start + chunk])
    return SelectionTrace(sel.committed, sel.rows)


def select_adaptive_corpus(
    dialogues: Sequence[Dialogue],
    scores: Mapping[str, ScoreVector],
    cfg: AdaptiveConfig,
) -> tuple[dict[str, BoundarySet], list[TraceRow]]:
    """One controller session across the corpus, one new position per arriving message.

    Spacing and pending candidates are per dialogue; the threshold and the
    rate window persist across dialogues so the controller can converge.
    """
    sel = AdaptiveSelector(cfg)
    out: dict[str, BoundarySet] = {}
    for d in dialogues:
        sel.begin_dialogue()
        for s in scores[d.id].scores:
            sel.step((s,))
        out[d.id] = sel.committed
    return out, sel.rows


# --------------------------------------------------------------------------
# baselines


def baseline_no_boundary(d: Dialogue) -> BoundarySet:
    return ()


def baseline_periodic(d: Dialogue, n: int) -> BoundarySet:
    if n < 1:
        raise ConfigError("period must be a positive integer")
    return tuple(range(n, d.num_messages, n))


def baseline_oracle_random(d: Dialogue, seed: int) -> BoundarySet:
    """``|gold|`` distinct positions drawn uniformly, seeded per dialogue id."""
    k = len(d.gold)
    if k == 0:
        return ()
    rng = rng_for(seed, "oracle-random", d.id)
    picks = rng.choice(d.num_positions, size=k, replace=False) + 1
    return tuple(sorted(int(p) for p in picks))


def _nearest_free(p: int, taken: set[int], num_messages: int) -> int:
    for offset in range(num_messages):
        for q in (p - offset, p + offset):
            if 1 <= q <= num_messages - 1 and q not in taken:
                return q
    raise ValueError("no free boundary position left")


def baseline_oracle_periodic(d: Dialogue) -> BoundarySet:
    """``|gold|`` evenly spaced boundaries at ``round(j*T/(k+1))`` (half-up)."""
    k, T = len(d.gold), d.num_messages
    taken: set[int] = set()
    for j in range(1, k + 1):
        p = min(max(math.floor(j * T / (k + 1) + 0.5), 1), T - 1)
        # Collisions cannot arise for k <= T-1; the shift keeps the count exact regardless.
        taken.add(_nearest_free(p, taken, T))
    return tuple(sorted(taken))


# --------------------------------------------------------------------------
# boundary files


def write_boundaries(path: str | Path, predictions: Mapping[str, BoundarySet],
                     order: Sequence[str] | None = None, meta: dict | None = None) -> None:
    ids = order if order is not None else sorted(predictions)
    jsonl.write_records(path, ({"id": did, "boundaries": list(predictions[did])} for did in ids), meta=meta)


def read_boundaries(path: str | Path, dialogues: Sequence[Dialogue]) -> dict[str, BoundarySet]:
    """Read ``{id, boundaries}`` records and validate them against ``dialogues``."""
    sizes = {d.id: d.num_messages for d in dialogues}
    out: dict[str, BoundarySet] = {}
    for line_no, record in jsonl.read_records(path):
        did, bounds = record.get("id"), record.get("boundaries")
        if not isinstance(did, str) or not isinstance(bounds, list):
            raise ValueError(f"{path}:{line_no}: boundary records need 'id' and a 'boundaries' list")
        if did not in sizes:
            raise ValueError(f"{path}:{line_no}: unknown dialogue id {did!r}")
        try:
            out[did] = boundary_set(bounds, sizes[did])
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: dialogue {did!r}: {exc}") from None
    missing = [did for did in sizes if did not in out]
    if missing:
        raise ValueError(f"{path}: no boundaries for dialogue(s) {missing[:5]}")
    return out


TRACE_COLUMNS = ("t", "tau", "candidates_seen", "committed")


def trace_rows(rows: Sequence[TraceRow]) -> list[dict[str, str]]:
    return [
        {"t": str(r.t), "tau": f"{r.tau:.6f}", "candidates_seen": str(r.candidates_seen),
         "committed": str(r.committed)}
        for r in rows
    ]
