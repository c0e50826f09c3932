"""Slow reference implementations used only to check the real ones."""
from __future__ import annotations

import itertools
from collections import Counter


def window_counts(num_messages: int, pred, gold, w: int) -> tuple[int, int]:
    """TP and matched-gold by scanning every position's neighbourhood."""
    P, G = set(pred), set(gold)
    tp = mg = 0
    for pos in range(1, num_messages):
        near = range(pos - w, pos + w + 1)
        if pos in P and any(q in G for q in near):
            tp += 1
        if pos in G and any(q in P for q in near):
            mg += 1
    return tp, mg


def max_assignment(pred, gold, w: int) -> int:
    """Largest injective pred -> gold assignment with |p-g| <= w, by trying all of them."""
    P, G = sorted(set(pred)), sorted(set(gold))
    slots = list(range(len(G))) + [None] * len(P)
    best = 0
    for choice in set(itertools.permutations(slots, len(P))):
        ok = sum(1 for p, j in zip(P, choice) if j is not None and abs(p - G[j]) <= w)
        best = max(best, ok)
    return best


def segment_labels(num_messages: int, boundaries) -> list[int]:
    cuts = set(boundaries)
    labels, seg = [], 0
    for i in range(1, num_messages + 1):
        labels.append(seg)
        if i in cuts:
            seg += 1
    return labels


def purity_coverage(num_messages: int, gold, pred) -> tuple[float, float]:
    g = segment_labels(num_messages, gold)
    p = segment_labels(num_messages, pred)
    joint = Counter(zip(p, g))
    purity = sum(max(c for (pp, _), c in joint.items() if pp == k) for k in set(p))
    coverage = sum(max(c for (_, gg), c in joint.items() if gg == k) for k in set(g))
    return purity / num_messages, coverage / num_messages


def nms_reference(scores, tau: float, g: int) -> tuple[int, ...]:
    """Greedy NMS written the obvious quadratic way."""
    order = sorted((i for i in range(1, len(scores) + 1) if scores[i - 1] >= tau),
                   key=lambda i: (-scores[i - 1], i))
    kept: list[int] = []
    for i in order:
        if all(abs(i - b) >= g for b in kept):
            kept.append(i)
    return tuple(sorted(kept))
