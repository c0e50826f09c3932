"""Run configuration and the corpus -> scores -> boundaries wiring used by the CLI."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import jsonl
from .corpus import BoundarySet, CanonRule, Dialogue, attach_gold, derive_gold, ingest, read_gold
from .metrics import Matching
from .scoring import ScoreVector, score_corpus
from .selection import (
    AdaptiveConfig,
    ConfigError,
    TraceRow,
    baseline_no_boundary,
    baseline_oracle_periodic,
    baseline_oracle_random,
    baseline_periodic,
    read_boundaries,
    select_adaptive_corpus,
    select_static,
)

METHODS = (
    "static", "adaptive", "no-boundary", "periodic", "oracle-random", "oracle-periodic", "predictions",
)
# Fields that change how a run executes or where it writes, never what it computes.
EXECUTION_ONLY = frozenset({"threads", "output", "output_csv", "report", "boundaries_output", "trace_output"})


@dataclass
class RunConfig:
    corpus: str | None = None
    gold: str | None = None
    rule: str | None = None
    unit: str = "U"
    drop_speakers: list[str] = field(default_factory=list)
    dataset: str | None = None

    name: str | None = None
    method: str = "static"
    scorer: str = "lexical"
    context: int = 4
    temperature: float | None = None
    tau: float = 0.50
    gap: int = 3
    rho: float = 0.167
    eta: float = 0.05
    rate_window: int = 200
    tau0: float = 0.50
    max_age: int | None = 4
    candidate_threshold: float | None = None
    period: int | None = None
    predictions: str | None = None

    window: int = 1
    matching: str = "coverage"
    regime_cutoffs: tuple[float, float] = (0.80, 1.25)
    resamples: int = 1000
    seed: int = 0
    tau_min: float = 0.05
    tau_max: float = 0.95
    tau_step: float = 0.05

    threads: int = 1
    output: str | None = None
    output_csv: str | None = None
    report: str | None = None
    boundaries_output: str | None = None
    trace_output: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        try:
            Matching(self.matching)
        except ValueError:
            raise ConfigError(f"matching must be 'coverage' or 'one-to-one', got {self.matching!r}") from None
        self.regime_cutoffs = tuple(float(x) for x in self.regime_cutoffs)
        if len(self.regime_cutoffs) != 2 or not 0 <= self.regime_cutoffs[0] <= self.regime_cutoffs[1]:
            raise ConfigError("regime cutoffs need two values 0 <= lo <= hi")
        if self.window < 0:
            raise ConfigError("tolerance window must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
        """Read a JSON config; relative input paths resolve against the config's directory."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        base = Path(path).parent
        for key in ("corpus", "gold", "predictions"):
            if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
        if isinstance(data.get("scorer"), str) and data["scorer"].startswith("file:"):
            target = data["scorer"][5:]
            if not Path(target).is_absolute():
                data["scorer"] = "file:" + str(base / target)
        data.update(overrides or {})
        return cls.from_mapping(data)

    def embedded(self) -> dict[str, Any]:
        """The configuration as recorded in output headers."""
        out = dataclasses.asdict(self)
        for key in EXECUTION_ONLY:
            out.pop(key, None)
        out["regime_cutoffs"] = list(self.regime_cutoffs)
        return out

    @property
    def matching_mode(self) -> Matching:
        return Matching(self.matching)

    def method_label(self) -> str:
        if self.name:
            return self.name
        if self.method in ("static", "adaptive"):
            return f"{self.method}:{self.scorer}"
        if self.method == "periodic":
            return f"periodic:{self.period}"
        if self.method == "predictions":
            return f"predictions:{Path(self.predictions or '').name}"
        return self.method

    def dataset_label(self) -> str:
        if self.dataset:
            return self.dataset
        return Path(self.corpus).stem if self.corpus else ""

    def adaptive(self) -> AdaptiveConfig:
        return AdaptiveConfig(
            rho=self.rho, g=self.gap, window=self.rate_window, eta=self.eta, tau0=self.tau0,
            max_age=self.max_age, candidate_threshold=self.candidate_threshold,
        )

    def input_files(self) -> list[str]:
        files = [self.corpus, self.gold, self.predictions]
        if self.scorer.startswith("file:") and self.method in ("static", "adaptive"):
            files.append(self.scorer[5:])
        return [f for f in files if f]

    def header(self) -> dict[str, Any]:
        return {"config": self.embedded(), "inputs_sha256": jsonl.file_sha256(*self.input_files())}


def load_corpus(cfg: RunConfig) -> list[Dialogue]:
    """Ingest the corpus and attach gold from an export file or a derivation rule."""
    if not cfg.corpus:
        raise ConfigError("no corpus given")
    dialogues = ingest(cfg.corpus)
    if cfg.gold:
        return attach_gold(dialogues, read_gold(cfg.gold))
    if cfg.rule:
        rule = CanonRule.parse(cfg.rule, cfg.unit, cfg.drop_speakers)
        return [derive_gold(d, rule) for d in dialogues]
    raise ConfigError("gold boundaries need either a gold file or a derivation rule")


@dataclass
class MethodOutput:
    predictions: dict[str, BoundarySet]
    scores: dict[str, ScoreVector] | None = None
    trace: list[TraceRow] | None = None


def corpus_scores(cfg: RunConfig, dialogues: Sequence[Dialogue]) -> dict[str, ScoreVector]:
    return score_corpus(dialogues, cfg.scorer, seed=cfg.seed, context=cfg.context, temperature=cfg.temperature)


def run_method(cfg: RunConfig, dialogues: Sequence[Dialogue]) -> MethodOutput:
    m = cfg.method
    if m == "static":
        scores = corpus_scores(cfg, dialogues)
        preds = {d.id: select_static(scores[d.id].scores, cfg.tau, cfg.gap) for d in dialogues}
        return MethodOutput(preds, scores)
    if m == "adaptive":
        scores = corpus_scores(cfg, dialogues)
        preds, rows = select_adaptive_corpus(dialogues, scores, cfg.adaptive())
        return MethodOutput(preds, scores, rows)
    if m == "no-boundary":
        return MethodOutput({d.id: baseline_no_boundary(d) for d in dialogues})
    if m == "periodic":
        if cfg.period is None:
            raise ConfigError("the periodic baseline needs a period")
        return MethodOutput({d.id: baseline_periodic(d, cfg.period) for d in dialogues})
    if m == "oracle-random":
        return MethodOutput({d.id: baseline_oracle_random(d, cfg.seed) for d in dialogues})
    if m == "oracle-periodic":
        return MethodOutput({d.id: baseline_oracle_periodic(d) for d in dialogues})
    if not cfg.predictions:
        raise ConfigError("method 'predictions' needs a predictions file")
    return MethodOutput(read_boundaries(cfg.predictions, dialogues))
