"""Granularity-aware evaluation of dialogue topic segmentation."""
from .corpus import CanonRule, Dialogue, Message, derive_gold, ingest
from .metrics import Matching, MetricsReport, Regime, evaluate, wf1_dialogue, wf1_one_to_one
from .scoring import ScoreKind, ScoreVector, fit_temperature
from .selection import AdaptiveConfig, select_adaptive, select_static

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig", "CanonRule", "Dialogue", "Matching", "Message", "MetricsReport", "Regime",
    "ScoreKind", "ScoreVector", "derive_gold", "evaluate", "fit_temperature", "ingest",
    "select_adaptive", "select_static", "wf1_dialogue", "wf1_one_to_one",
]
