"""Density-quality sweeps, dialogue-level bootstrap, paired method comparison."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import BoundarySet, Dialogue
from .metrics import (
    DEFAULT_REGIME_CUTOFFS,
    DEFAULT_WINDOW,
    Matching,
    MetricsReport,
    Regime,
    evaluate,
)
from .scoring import ScoreKind, ScoreVector
from .selection import DEFAULT_GAP, candidates, select_static
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 1000
CI_LEVEL = 0.95


class CorpusMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------
# bootstrap


def resample_indices(n: int, b: int, seed: int) -> np.ndarray:
    """``(b, n)`` matrix of dialogue indices drawn with replacement."""
    rng = np.random.default_rng(derive_seed(seed, "bootstrap", n, b))
    return rng.integers(0, n, size=(b, n))


def _mean(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=1)


def _ratio(x: np.ndarray) -> np.ndarray:
    num, den = x[..., 0].sum(axis=1), x[..., 1].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    # same convention as BOR: 0/0 is 0, k/0 is undefined
    out[(den == 0) & (num == 0)] = 0.0
    out[(den == 0) & (num != 0)] = np.nan
    return out


def _micro_f1(x: np.ndarray) -> np.ndarray:
    hits, n_pred, n_gold = (x[..., k].sum(axis=1) for k in range(3))
    den = n_pred + n_gold
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2 * hits / den
    out[den == 0] = 1.0
    return out


STATISTICS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "mean": _mean,
    "ratio": _ratio,
    "f1": _micro_f1,
}


def _replicates(data: np.ndarray, statistic: str | Callable, idx: np.ndarray) -> np.ndarray:
    if callable(statistic):
        return np.array([statistic(data[row]) for row in idx], dtype=float)
    try:
        fn = STATISTICS[statistic]
    except KeyError:
        raise ValueError(f"unknown statistic {statistic!r}; expected one of {sorted(STATISTICS)}") from None
    return fn(data[idx])


def _percentile_interval(reps: np.ndarray, level: float) -> tuple[float, float] | None:
    finite = reps[~np.isnan(reps)]
    if finite.size == 0:
        return None
    if finite.size < reps.size:
        log.info("%d of %d bootstrap replicates undefined; dropped", reps.size - finite.size, reps.size)
    alpha = (1 - level) / 2
    lo, hi = np.percentile(finite, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def bootstrap_ci(
    data: Sequence | np.ndarray,
    statistic: str | Callable[[np.ndarray], float] = "mean",
    b: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    level: float = CI_LEVEL,
    indices: np.ndarray | None = None,
) -> tuple[float, float] | None:
    """Percentile interval of ``statistic`` over dialogue resamples.

    ``data`` has one row per dialogue: a scalar for ``"mean"``, a
    ``(numerator, denominator)`` pair for ``"ratio"``, and a ``(hits,
    n_pred, n_gold)`` triple for ``"f1"``. Micro statistics are recomputed
    from resampled sums rather than averaged. Returns ``None`` if every
    replicate is undefined.
    """
    arr = np.asarray(data, dtype=float)
    n = arr.shape[0]
    if n < 2:
        raise ValueError("bootstrap needs at least two dialogues")
    if indices is None:
        if b < 100:
            raise ValueError("use at least 100 bootstrap resamples")
        indices = resample_indices(n, b, seed)
    return _percentile_interval(_replicates(arr, statistic, indices), level)


def _report_columns(report: MetricsReport) -> dict[str, np.ndarray]:
    rows = report.per_dialogue
    return {
        "wf1": np.array([s.wf1 for s in rows], dtype=float),
        "purity": np.array([s.purity for s in rows], dtype=float),
        "coverage": np.array([s.coverage for s in rows], dtype=float),
        "bor": np.array([(s.n_pred, s.n_gold) for s in rows], dtype=float),
        "f1": np.array([(s.exact_tp, s.n_pred, s.n_gold) for s in rows], dtype=float),
    }


_METRIC_STATISTIC = {"wf1": "mean", "purity": "mean", "coverage": "mean", "bor": "ratio", "f1": "f1"}


def report_replicates(report: MetricsReport, indices: np.ndarray) -> dict[str, np.ndarray]:
    cols = _report_columns(report)
    return {m: _replicates(cols[m], stat, indices) for m, stat in _METRIC_STATISTIC.items()}


def report_cis(
    report: MetricsReport,
    indices: np.ndarray,
    level: float = CI_LEVEL,
) -> dict[str, tuple[float, float] | None]:
    reps = report_replicates(report, indices)
    cis = {m: _percentile_interval(r, level) for m, r in reps.items()}
    for metric, ci in cis.items():
        point = report.bor if metric == "bor" else getattr(report, metric)
        if ci is not None and point is not None and not ci[0] <= point <= ci[1]:
            log.warning("%s point estimate %.4f lies outside its bootstrap interval %s", metric, point, ci)
    return cis


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepGrid:
    tau_min: float = 0.05
    tau_max: float = 0.95
    tau_step: float = 0.05
    g: int = DEFAULT_GAP

    def __post_init__(self) -> None:
        if not self.tau_min < self.tau_max:
            raise ValueError("tau_min must be below tau_max")
        if not self.tau_step > 0:
            raise ValueError("tau_step must be positive")
        if self.g < 1:
            raise ValueError("spacing g must be at least 1")

    def taus(self) -> list[float]:
        n = math.floor((self.tau_max - self.tau_min) / self.tau_step + 1e-9)
        return [round(self.tau_min + k * self.tau_step, 10) for k in range(n + 1)]


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    g: int
    report: MetricsReport
    candidate_count: int
    ci: dict[str, tuple[float, float] | None] = field(default_factory=dict)

    @property
    def bor(self) -> float | None:
        return self.report.bor

    @property
    def wf1(self) -> float:
        return self.report.wf1

    @property
    def f1(self) -> float:
        return self.report.f1

    @property
    def purity(self) -> float:
        return self.report.purity

    @property
    def coverage(self) -> float:
        return self.report.coverage


def sweep(
    dialogues: Sequence[Dialogue],
    scores: Mapping[str, ScoreVector],
    grid: SweepGrid = SweepGrid(),
    *,
    w: int = DEFAULT_WINDOW,
    matching: Matching = Matching.COVERAGE,
    cutoffs: tuple[float, float] = DEFAULT_REGIME_CUTOFFS,
    resamples: int = 0,
    seed: int = 0,
    threads: int = 1,
) -> list[SweepPoint]:
    """Static selection at every threshold on ``grid``, one point per threshold.

    All points share the same bootstrap resamples so their intervals are
    comparable along the curve.
    """
    for v in scores.values():
        if v.kind is not ScoreKind.PROBABILITY:
            raise ValueError("threshold sweeps need probability scores; calibrate logits first")
    indices = resample_indices(len(dialogues), resamples, seed) if resamples else None

    def point(tau: float) -> SweepPoint:
        preds = {d.id: select_static(scores[d.id].scores, tau, grid.g) for d in dialogues}
        n_cand = sum(len(candidates(scores[d.id].scores, tau)) for d in dialogues)
        report = evaluate(dialogues, preds, w, matching, cutoffs)
        ci = report_cis(report, indices) if indices is not None else {}
        return SweepPoint(tau, grid.g, report, n_cand, ci)

    taus = grid.taus()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, taus))
    return [point(t) for t in taus]


SWEEP_COLUMNS = (
    "method", "tau", "g", "bor", "wf1", "wf1_lo", "wf1_hi", "f1", "purity", "coverage",
    "coverage_lo", "coverage_hi", "pred_count", "gold_count", "regime",
)


def fmt(x: float | None) -> str:
    if x is None:
        return "undefined"
    return f"{x:.6f}"


def sweep_rows(method: str, points: Sequence[SweepPoint]) -> list[dict[str, str]]:
    rows = []
    for p in points:
        wf1_ci = p.ci.get("wf1")
        cov_ci = p.ci.get("coverage")
        rows.append({
            "method": method,
            "tau": f"{p.tau:.2f}",
            "g": str(p.g),
            "bor": fmt(p.bor),
            "wf1": fmt(p.wf1),
            "wf1_lo": fmt(wf1_ci[0]) if wf1_ci else "",
            "wf1_hi": fmt(wf1_ci[1]) if wf1_ci else "",
            "f1": fmt(p.f1),
            "purity": fmt(p.purity),
            "coverage": fmt(p.coverage),
            "coverage_lo": fmt(cov_ci[0]) if cov_ci else "",
            "coverage_hi": fmt(cov_ci[1]) if cov_ci else "",
            "pred_count": str(p.report.pred_count),
            "gold_count": str(p.report.gold_count),
            "regime": p.report.regime.value,
        })
    return rows


def write_csv(path: str | Path, columns: Sequence[str], rows: Sequence[Mapping[str, str]],
              header: Sequence[str] = ()) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# --------------------------------------------------------------------------
# paired comparison


@dataclass(frozen=True)
class Delta:
    metric: str
    value: float | None
    ci: tuple[float, float] | None


@dataclass(frozen=True)
class Comparison:
    report_a: MetricsReport
    report_b: MetricsReport
    deltas: tuple[Delta, ...]

    @property
    def regime_a(self) -> Regime:
        return self.report_a.regime

    @property
    def regime_b(self) -> Regime:
        return self.report_b.regime

    @property
    def density_shift(self) -> str:
        """Regime change from the second method to the first."""
        return f"{self.regime_b.value} -> {self.regime_a.value}"

    def delta(self, metric: str) -> Delta:
        return next(d for d in self.deltas if d.metric == metric)


def check_same_corpus(a: Sequence[Dialogue], b: Sequence[Dialogue]) -> None:
    key_a = [(d.id, d.num_messages, d.gold) for d in a]
    key_b = [(d.id, d.num_messages, d.gold) for d in b]
    if key_a != key_b:
        raise CorpusMismatchError("methods were evaluated on different dialogue sets or gold annotations")


def compare_methods(
    dialogues: Sequence[Dialogue],
    preds_a: Mapping[str, BoundarySet],
    preds_b: Mapping[str, BoundarySet],
    *,
    w: int = DEFAULT_WINDOW,
    matching: Matching = Matching.COVERAGE,
    cutoffs: tuple[float, float] = DEFAULT_REGIME_CUTOFFS,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    level: float = CI_LEVEL,
) -> Comparison:
    """Deltas (first minus second) for F1, W-F1 and BOR with paired bootstrap CIs."""
    ids = {d.id for d in dialogues}
    if set(preds_a) != ids or set(preds_b) != ids:
        raise CorpusMismatchError("both methods need predictions for exactly the corpus dialogues")
    rep_a = evaluate(dialogues, preds_a, w, matching, cutoffs)
    rep_b = evaluate(dialogues, preds_b, w, matching, cutoffs)
    if resamples < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    indices = resample_indices(len(dialogues), resamples, seed)
    reps_a = report_replicates(rep_a, indices)
    reps_b = report_replicates(rep_b, indices)

    deltas = []
    for metric in ("f1", "wf1", "bor"):
        va, vb = (rep_a.bor, rep_b.bor) if metric == "bor" else (getattr(rep_a, metric), getattr(rep_b, metric))
        value = None if va is None or vb is None else va - vb
        ci = _percentile_interval(reps_a[metric] - reps_b[metric], level)
        deltas.append(Delta(metric, value, ci))
    return Comparison(rep_a, rep_b, tuple(deltas))


def format_comparison(comp: Comparison, name_a: str, name_b: str, dataset: str = "") -> str:
    def cell(d: Delta, digits: int) -> str:
        if d.value is None:
            return "undefined"
        text = f"{d.value:+.{digits}f}"
        if d.ci is not None:
            text += f" [{d.ci[0]:.{digits}f}, {d.ci[1]:.{digits}f}]"
        return text

    header = ("Comparison", "Dataset", "dF1", "dW-F1 [95% CI]", "dBOR [95% CI]", "Density Shift")
    row = (
        f"{name_a} vs. {name_b}", dataset,
        cell(comp.delta("f1"), 3), cell(comp.delta("wf1"), 3), cell(comp.delta("bor"), 2),
        comp.density_shift,
    )
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    lines = ["  ".join(x.ljust(wd) for x, wd in zip(line, widths)).rstrip() for line in (header, row)]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# diagnostics


def negative_control_rate(dialogues: Sequence[Dialogue], predictions: Mapping[str, BoundarySet]) -> float:
    """Predicted boundaries per candidate position on dialogues with no gold boundary."""
    with_gold = [d.id for d in dialogues if d.gold]
    if with_gold:
        raise ValueError(f"negative control corpus has gold boundaries in {with_gold[:5]}")
    positions = sum(d.num_positions for d in dialogues)
    if positions == 0:
        raise ValueError("negative control corpus has no candidate positions")
    return sum(len(predictions[d.id]) for d in dialogues) / positions


def mean_abs_score(vectors: Sequence[ScoreVector]) -> float:
    """Mean score magnitude over every position; a collapse diagnostic."""
    values = [abs(s) for v in vectors for s in v.scores]
    if not values:
        raise ValueError("no scores")
    return math.fsum(values) / len(values)

