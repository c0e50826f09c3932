import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granseg.scoring import ScoreVector
from granseg.selection import (
    AdaptiveConfig,
    AdaptiveSelector,
    ConfigError,
    baseline_no_boundary,
    baseline_oracle_periodic,
    baseline_oracle_random,
    baseline_periodic,
    read_boundaries,
    select_adaptive,
    select_adaptive_corpus,
    select_static,
    trace_rows,
    update_threshold,
    write_boundaries,
)
from tests import oracles
from tests.helpers import make_dialogue, random_corpus, write_jsonl

score_lists = st.lists(st.floats(0, 1), max_size=60)
# coarse scores force plenty of ties
tied_lists = st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), max_size=60)


def test_static_by_hand():
    scores = [0.1, 0.9, 0.8, 0.2, 0.7, 0.95, 0.6]
    # candidates >= .5: 2,3,5,6,7 ; order 6,2,3,5,7 ; g=3 keeps 6, 2 ; 3 too close to 2, 5/7 to 6
    assert select_static(scores, 0.5, 3) == (2, 6)
    assert select_static(scores, 0.5, 1) == (2, 3, 5, 6, 7)
    assert select_static(scores, 0.99, 3) == ()


def test_static_ties_prefer_smaller_index():
    assert select_static([0.8, 0.8, 0.8], 0.5, 2) == (1, 3)
    assert select_static([0.5, 0.8, 0.8], 0.5, 2) == (2,)


def test_static_accepts_score_vector():
    assert select_static(ScoreVector("x", (0.9, 0.1, 0.9)), 0.5, 2) == (1, 3)


def test_static_rejects_bad_gap():
    with pytest.raises(ConfigError):
        select_static([0.9], 0.5, 0)


@given(st.one_of(score_lists, tied_lists), st.floats(0, 1), st.integers(1, 6))
@settings(max_examples=300, deadline=None)
def test_static_matches_reference(scores, tau, g):
    assert select_static(scores, tau, g) == oracles.nms_reference(scores, tau, g)


@given(score_lists, st.floats(0, 1), st.integers(1, 6))
@settings(max_examples=200, deadline=None)
def test_static_spacing_and_threshold(scores, tau, g):
    out = select_static(scores, tau, g)
    assert all(b - a >= g for a, b in zip(out, out[1:]))
    assert all(scores[i - 1] >= tau for i in out)


@given(score_lists, st.integers(1, 6))
@settings(max_examples=150, deadline=None)
def test_higher_threshold_yields_subset_of_candidates(scores, g):
    lo, hi = select_static(scores, 0.3, 1), select_static(scores, 0.7, 1)
    assert set(hi) <= set(lo)


# --------------------------------------------------------------------------
# adaptive


def test_adaptive_config_validation():
    for kw in ({"rho": 0}, {"rho": 1}, {"rho": 0.2, "g": 0}, {"rho": 0.2, "window": 0},
               {"rho": 0.2, "eta": -1}, {"rho": 0.2, "max_age": 0}):
        with pytest.raises(ConfigError):
            AdaptiveConfig(**kw)


def test_update_rule():
    assert update_threshold(0.5, 0.1, 0.3, 0.2) == pytest.approx(0.51)
    assert update_threshold(0.5, 0.1, 0.1, 0.2) == pytest.approx(0.49)


def test_adaptive_accumulates_evidence():
    # a 0.3 candidate needs two steps to reach tau=0.5
    cfg = AdaptiveConfig(rho=0.5, g=1, eta=0.0, tau0=0.5, max_age=2)
    sel = AdaptiveSelector(cfg)
    assert sel.step([0.3]) == []
    assert sel.step([]) == [1]
    # with max_age 1 it expires instead
    sel = AdaptiveSelector(AdaptiveConfig(rho=0.5, g=1, eta=0.0, tau0=0.5, max_age=1))
    sel.step([0.3])
    assert sel.step([]) == []


def test_adaptive_spacing_retires_candidates():
    cfg = AdaptiveConfig(rho=0.5, g=3, eta=0.0, tau0=0.5, max_age=4)
    trace = select_adaptive([0.9, 0.9, 0.9, 0.9, 0.9], cfg)
    assert trace.committed == (1, 4)


def test_candidate_threshold_gates_activation():
    cfg = AdaptiveConfig(rho=0.5, g=1, eta=0.0, tau0=0.5, max_age=4, candidate_threshold=0.2)
    trace = select_adaptive([0.15, 0.15, 0.15, 0.15, 0.3, 0.3], cfg)
    assert trace.committed == (5,)
    assert trace.candidate_count == 6


def test_threshold_moves_toward_target():
    rng = np.random.default_rng(0)
    cfg = AdaptiveConfig(rho=0.05, g=1, eta=0.1, tau0=0.2, max_age=1)
    trace = select_adaptive(rng.random(2000), cfg)
    assert trace.rows[-1].tau > 0.5
    assert trace.rows[0].tau == 0.2 and trace.rows[0].t == 0
    assert len(trace.rows) == 2001


def test_negative_threshold_is_logged(caplog):
    cfg = AdaptiveConfig(rho=0.99, g=1, eta=0.5, tau0=0.1, max_age=1)
    trace = select_adaptive([0.01] * 50, cfg)
    assert min(trace.tau_history, key=lambda r: r[1])[1] < 0
    assert "negative" in caplog.text


@given(st.lists(st.floats(0, 1), max_size=80), st.floats(0.05, 0.95), st.integers(1, 5))
@settings(max_examples=200, deadline=None)
def test_single_step_frozen_controller_equals_static(scores, tau, g):
    cfg = AdaptiveConfig(rho=0.2, g=g, eta=0.0, tau0=tau, max_age=1)
    assert select_adaptive(scores, cfg, step_size=None).committed == select_static(scores, tau, g)


@given(st.lists(st.floats(0, 1), max_size=80), st.floats(0.01, 0.5), st.integers(1, 5),
       st.sampled_from([1, 3, None]))
@settings(max_examples=150, deadline=None)
def test_adaptive_output_is_well_formed(scores, rho, g, step):
    trace = select_adaptive(scores, AdaptiveConfig(rho=rho, g=g), step_size=step)
    out = trace.committed
    assert list(out) == sorted(set(out))
    assert all(1 <= b <= len(scores) for b in out)
    assert all(b - a >= g for a, b in zip(out, out[1:]))
    assert trace.commit_count == len(out)


def test_corpus_controller_is_per_dialogue():
    ds = [make_dialogue("a", 30), make_dialogue("b", 12)]
    rng = np.random.default_rng(1)
    scores = {d.id: ScoreVector(d.id, tuple(rng.random(d.num_positions))) for d in ds}
    preds, rows = select_adaptive_corpus(ds, scores, AdaptiveConfig(rho=0.2, g=3))
    assert preds["b"] and all(1 <= b <= 11 for b in preds["b"])
    assert rows[-1].candidates_seen == 29 + 11
    assert rows[-1].committed == len(preds["a"]) + len(preds["b"])
    assert len(trace_rows(rows)) == len(rows)


# --------------------------------------------------------------------------
# baselines


def test_simple_baselines():
    d = make_dialogue("x", 10, [3, 7])
    assert baseline_no_boundary(d) == ()
    assert baseline_periodic(d, 3) == (3, 6, 9)
    assert baseline_periodic(d, 10) == ()
    with pytest.raises(ConfigError):
        baseline_periodic(d, 0)


def test_oracle_periodic_positions():
    # round(j*10/3) for j=1,2 -> 3, 7 ; round(j*7/4) -> 2, 4, 5 (1.75, 3.5, 5.25)
    assert baseline_oracle_periodic(make_dialogue("x", 10, [1, 2])) == (3, 7)
    assert baseline_oracle_periodic(make_dialogue("x", 7, [1, 2, 3])) == (2, 4, 5)
    assert baseline_oracle_periodic(make_dialogue("x", 5, [1, 2, 3, 4])) == (1, 2, 3, 4)


def test_oracle_baselines_match_gold_count():
    rng = random.Random(2)
    for d in random_corpus(rng, n=200, max_len=25, boundary_rate=0.5):
        for fn in (baseline_oracle_periodic, lambda x: baseline_oracle_random(x, 7)):
            out = fn(d)
            assert len(out) == len(d.gold)
            assert all(1 <= b < d.num_messages for b in out)


def test_oracle_random_is_seeded():
    d = make_dialogue("x", 40, [5, 10, 20])
    assert baseline_oracle_random(d, 1) == baseline_oracle_random(d, 1)
    assert any(baseline_oracle_random(d, 1) != baseline_oracle_random(d, s) for s in range(2, 6))


def test_boundary_file_roundtrip(tmp_path):
    ds = [make_dialogue("a", 10), make_dialogue("b", 3)]
    write_boundaries(tmp_path / "p.jsonl", {"a": (2, 5), "b": ()}, meta={"x": 1})
    assert read_boundaries(tmp_path / "p.jsonl", ds) == {"a": (2, 5), "b": ()}
    write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "boundaries": [10]}, {"id": "b", "boundaries": []}])
    with pytest.raises(ValueError, match="'a'"):
        read_boundaries(tmp_path / "bad.jsonl", ds)
    write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "boundaries": []}])
    with pytest.raises(ValueError, match="no boundaries"):
        read_boundaries(tmp_path / "bad.jsonl", ds)
