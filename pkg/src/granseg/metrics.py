"""Boundary metrics: F1, window-tolerant F1, BOR, purity/coverage, regimes.

Aggregation is fixed: W-F1, purity and coverage are macro-averaged over
dialogues; F1 and BOR are micro ratios of corpus-wide sums.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import BoundarySet, Dialogue, segments_of

DEFAULT_WINDOW = 1
DEFAULT_REGIME_CUTOFFS = (0.80, 1.25)


class Matching(enum.Enum):
    COVERAGE = "coverage"
    ONE_TO_ONE = "one-to-one"


class Regime(enum.Enum):
    CONSERVATIVE = "Conservative"
    BALANCED = "Balanced"
    AGGRESSIVE = "Aggressive"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class DialogueScore:
    precision: float
    recall: float
    wf1: float
    tp: int
    mg: int
    purity: float | None = None
    coverage: float | None = None
    dialogue_id: str | None = None
    n_pred: int = 0
    n_gold: int = 0
    exact_tp: int = 0


# --------------------------------------------------------------------------
# per-dialogue boundary matching


def _precision_recall(tp: int, mg: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    precision = tp / n_pred if n_pred else 0.0
    recall = mg / n_gold if n_gold else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f1


def wf1_dialogue(pred: Iterable[int], gold: Iterable[int], w: int = DEFAULT_WINDOW) -> DialogueScore:
    """Window-coverage W-F1: several predictions may credit the same gold boundary."""
    if w < 0:
        raise ValueError("tolerance window must be non-negative")
    P, G = sorted(set(pred)), sorted(set(gold))
    tp = sum(1 for p in P if any(abs(p - g) <= w for g in G))
    mg = sum(1 for g in G if any(abs(p - g) <= w for p in P))
    precision, recall, f1 = _precision_recall(tp, mg, len(P), len(G))
    return DialogueScore(precision, recall, f1, tp, mg, n_pred=len(P), n_gold=len(G),
                         exact_tp=len(set(P) & set(G)))


def max_window_matching(pred: Sequence[int], gold: Sequence[int], w: int) -> list[tuple[int, int]]:
    """Maximum-cardinality matching between ``pred`` and ``gold`` with ``|p-g| <= w``.

    Kuhn's augmenting-path algorithm. Inputs are at most a few hundred
    boundaries per dialogue, so the O(V*E) bound is irrelevant.
    """
    P, G = sorted(set(pred)), sorted(set(gold))
    adj = [[j for j, g in enumerate(G) if abs(p - g) <= w] for p in P]
    match_of_gold: list[int | None] = [None] * len(G)

    def augment(i: int, visited: list[bool]) -> bool:
        for j in adj[i]:
            if visited[j]:
                continue
            visited[j] = True
            owner = match_of_gold[j]
            if owner is None or augment(owner, visited):
                match_of_gold[j] = i
                return True
        return False

    for i in range(len(P)):
        augment(i, [False] * len(G))
    return sorted((P[i], G[j]) for j, i in enumerate(match_of_gold) if i is not None)


def wf1_one_to_one(pred: Iterable[int], gold: Iterable[int], w: int = DEFAULT_WINDOW) -> DialogueScore:
    if w < 0:
        raise ValueError("tolerance window must be non-negative")
    P, G = sorted(set(pred)), sorted(set(gold))
    tp = len(max_window_matching(P, G, w))
    precision, recall, f1 = _precision_recall(tp, tp, len(P), len(G))
    return DialogueScore(precision, recall, f1, tp, tp, n_pred=len(P), n_gold=len(G),
                         exact_tp=len(set(P) & set(G)))


# --------------------------------------------------------------------------
# corpus-level ratios


def f1_micro(pairs: Iterable[tuple[Iterable[int], Iterable[int]]]) -> float:
    hits = n_pred = n_gold = 0
    for P, G in pairs:
        P, G = set(P), set(G)
        hits += len(P & G)
        n_pred += len(P)
        n_gold += len(G)
    if n_pred + n_gold == 0:
        return 1.0
    return 2 * hits / (n_pred + n_gold)


def bor_from_counts(n_pred: int, n_gold: int) -> float | None:
    """Predicted/gold boundary ratio; ``None`` when gold is empty but predictions are not."""
    if n_gold > 0:
        return n_pred / n_gold
    return 0.0 if n_pred == 0 else None


def bor(pairs: Iterable[tuple[Iterable[int], Iterable[int]]]) -> float | None:
    n_pred = n_gold = 0
    for P, G in pairs:
        n_pred += len(set(P))
        n_gold += len(set(G))
    return bor_from_counts(n_pred, n_gold)


# --------------------------------------------------------------------------
# segment alignment


def _overlap(s: tuple[int, int], t: tuple[int, int]) -> int:
    return max(0, min(s[1], t[1]) - max(s[0], t[0]) + 1)


def purity_coverage(num_messages: int, gold: Iterable[int], pred: Iterable[int]) -> tuple[float, float]:
    """Turn-weighted purity and coverage of ``pred`` against ``gold``.

    Empty ``gold`` means the whole dialogue is one gold segment.
    """
    gold_segs = segments_of(num_messages, set(gold))
    pred_segs = segments_of(num_messages, set(pred))
    purity = sum(max(_overlap(p, g) for g in gold_segs) for p in pred_segs)
    coverage = sum(max(_overlap(p, g) for p in pred_segs) for g in gold_segs)
    return purity / num_messages, coverage / num_messages


# --------------------------------------------------------------------------
# regimes


def classify_regime(value: float | None, cutoffs: tuple[float, float] = DEFAULT_REGIME_CUTOFFS) -> Regime:
    lo, hi = cutoffs
    if value is None or math.isnan(value):
        return Regime.UNDEFINED
    if value < 0:
        raise ValueError("BOR cannot be negative")
    if value < lo:
        return Regime.CONSERVATIVE
    if value <= hi:
        return Regime.BALANCED
    return Regime.AGGRESSIVE


def parse_cutoffs(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"regime cutoffs must look like 'lo,hi', got {text!r}") from None
    if not 0 <= lo <= hi:
        raise ValueError("regime cutoffs need 0 <= lo <= hi")
    return lo, hi


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MetricsReport:
    wf1: float
    f1: float
    bor: float | None
    purity: float
    coverage: float
    pred_count: int
    gold_count: int
    regime: Regime
    window: int = DEFAULT_WINDOW
    matching: Matching = Matching.COVERAGE
    per_dialogue: tuple[DialogueScore, ...] = field(default=(), repr=False)

    @property
    def num_dialogues(self) -> int:
        return len(self.per_dialogue)

    def row(self) -> dict[str, object]:
        return {
            "wf1": self.wf1,
            "f1": self.f1,
            "bor": self.bor,
            "purity": self.purity,
            "coverage": self.coverage,
            "pred_count": self.pred_count,
            "gold_count": self.gold_count,
            "regime": self.regime.value,
        }


def score_dialogue(
    d: Dialogue,
    pred: BoundarySet,
    w: int = DEFAULT_WINDOW,
    matching: Matching = Matching.COVERAGE,
) -> DialogueScore:
    scorer = wf1_dialogue if matching is Matching.COVERAGE else wf1_one_to_one
    base = scorer(pred, d.gold, w)
    purity, coverage = purity_coverage(d.num_messages, d.gold, pred)
    return DialogueScore(
        base.precision, base.recall, base.wf1, base.tp, base.mg,
        purity=purity, coverage=coverage, dialogue_id=d.id,
        n_pred=base.n_pred, n_gold=base.n_gold, exact_tp=base.exact_tp,
    )


def aggregate(
    scores: Sequence[DialogueScore],
    w: int = DEFAULT_WINDOW,
    matching: Matching = Matching.COVERAGE,
    cutoffs: tuple[float, float] = DEFAULT_REGIME_CUTOFFS,
) -> MetricsReport:
    if not scores:
        raise ValueError("cannot aggregate metrics over an empty dataset")
    n = len(scores)
    pred_count = sum(s.n_pred for s in scores)
    gold_count = sum(s.n_gold for s in scores)
    hits = sum(s.exact_tp for s in scores)
    f1 = 1.0 if pred_count + gold_count == 0 else 2 * hits / (pred_count + gold_count)
    ratio = bor_from_counts(pred_count, gold_count)
    return MetricsReport(
        wf1=math.fsum(s.wf1 for s in scores) / n,
        f1=f1,
        bor=ratio,
        purity=math.fsum(s.purity for s in scores) / n,
        coverage=math.fsum(s.coverage for s in scores) / n,
        pred_count=pred_count,
        gold_count=gold_count,
        regime=classify_regime(ratio, cutoffs),
        window=w,
        matching=matching,
        per_dialogue=tuple(scores),
    )


def evaluate(
    dialogues: Sequence[Dialogue],
    predictions: Mapping[str, BoundarySet],
    w: int = DEFAULT_WINDOW,
    matching: Matching = Matching.COVERAGE,
    cutoffs: tuple[float, float] = DEFAULT_REGIME_CUTOFFS,
) -> MetricsReport:
    """Score ``predictions`` (keyed by dialogue id) against each dialogue's gold."""
    missing = [d.id for d in dialogues if d.id not in predictions]
    if missing:
        raise KeyError(f"no predictions for dialogue(s) {missing[:5]}")
    scores = [score_dialogue(d, predictions[d.id], w, matching) for d in dialogues]
    return aggregate(scores, w, matching, cutoffs)


def format_bor(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.2f}"
