import math

import numpy as np
import pytest

from granseg.scoring import (
    CalibrationError,
    ScoreFileError,
    ScoreKind,
    ScoreVector,
    apply_temperature,
    binary_nll,
    fit_temperature,
    golden_section,
    load_scores,
    logistic,
    score_corpus,
    score_lexical_cohesion,
    score_random,
    tokenize,
    write_scores,
)
from tests.helpers import make_dialogue, write_jsonl


def test_tokenize():
    assert tokenize("Hello, WORLD! it's_ok 42") == ["hello", "world", "it", "s", "ok", "42"]


def test_lexical_scores_peak_at_topic_switch():
    texts = ["pizza cheese oven"] * 4 + ["train ticket station"] * 4
    d = make_dialogue("x", 8, [4], texts)
    v = score_lexical_cohesion(d, k=2)
    assert len(v) == 7
    assert v.scores[3] == pytest.approx(1.0)
    assert v.scores[0] == pytest.approx(0.0)
    assert max(range(7), key=lambda i: v.scores[i]) == 3


def test_lexical_empty_windows():
    d = make_dialogue("x", 3, [], ["...", "!!", "word"])
    v = score_lexical_cohesion(d, k=1)
    # both sides token-less -> no change; one side token-less -> full change
    assert v.scores == (0.0, 1.0)


def test_random_scores_keyed_by_id():
    a, b = make_dialogue("a", 20), make_dialogue("b", 20)
    assert score_random(a, 3).scores == score_random(a, 3).scores
    assert score_random(a, 3).scores != score_random(b, 3).scores
    assert score_random(a, 3).scores != score_random(a, 4).scores
    assert all(0 <= s < 1 for s in score_random(a, 3).scores)


def test_score_vector_validation():
    with pytest.raises(ValueError):
        ScoreVector("x", (0.5, 1.5))
    with pytest.raises(ValueError):
        ScoreVector("x", (math.nan,), ScoreKind.LOGIT)
    assert ScoreVector("x", (-3.0, 4.0), ScoreKind.LOGIT).scores == (-3.0, 4.0)


def test_score_file_roundtrip_and_errors(tmp_path):
    ds = [make_dialogue("a", 4), make_dialogue("b", 2)]
    vecs = [ScoreVector("a", (0.1, 0.9, 0.2)), ScoreVector("b", (2.0,), ScoreKind.LOGIT)]
    write_scores(tmp_path / "s.jsonl", vecs, meta={"note": 1})
    back = load_scores(tmp_path / "s.jsonl", ds)
    assert back["a"] == vecs[0] and back["b"] == vecs[1]

    write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "kind": "probability", "scores": [0.1]},
                                        {"id": "b", "kind": "logit", "scores": [0.0]}])
    with pytest.raises(ScoreFileError, match="3 candidate positions but 1"):
        load_scores(tmp_path / "bad.jsonl", ds)
    write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "kind": "odds", "scores": [0.1, 0.1, 0.1]}])
    with pytest.raises(ScoreFileError, match="kind"):
        load_scores(tmp_path / "bad.jsonl", ds)
    write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "kind": "probability", "scores": [0.1, 0.1, 0.1]}])
    with pytest.raises(ScoreFileError, match="no scores"):
        load_scores(tmp_path / "bad.jsonl", ds)


def test_logistic_is_stable():
    z = np.array([-800.0, 0.0, 800.0])
    assert logistic(z).tolist() == [0.0, 0.5, 1.0]


def test_apply_temperature():
    v = ScoreVector("x", (0.0, 2.0, -2.0), ScoreKind.LOGIT)
    p = apply_temperature(v, 2.0)
    assert p.kind is ScoreKind.PROBABILITY
    assert p.scores == pytest.approx((0.5, 1 / (1 + math.exp(-1)), 1 / (1 + math.exp(1))))
    with pytest.raises(ValueError):
        apply_temperature(p, 1.0)
    with pytest.raises(ValueError):
        apply_temperature(v, 0.0)


def test_binary_nll_by_hand():
    v = ScoreVector("x", (0.0, 1.0), ScoreKind.LOGIT)
    # position 1 negative at p=.5, position 2 positive at p=sigmoid(1)
    expected = (math.log(2) + math.log(1 + math.exp(-1))) / 2
    assert binary_nll([v], [(2,)]) == pytest.approx(expected)


def test_golden_section_quadratic():
    x = golden_section(lambda u: (u - 1.3) ** 2, -5, 5, 1e-8)
    assert x == pytest.approx(1.3, abs=1e-6)


def _synthetic(true_t: float, n: int, seed: int):
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 4.0, n)
    labels = rng.random(n) < logistic(logits / true_t)
    gold = tuple(int(i) + 1 for i in np.flatnonzero(labels))
    return ScoreVector("x", tuple(logits), ScoreKind.LOGIT), gold


@pytest.mark.parametrize("true_t", [0.5, 1.0, 3.0])
def test_temperature_recovery(true_t):
    v, gold = _synthetic(true_t, 20000, seed=11)
    t = fit_temperature([v], [gold])
    assert t == pytest.approx(true_t, rel=0.1)
    assert binary_nll([v], [gold], t) <= binary_nll([v], [gold], 1.0)


def test_temperature_is_global_minimum_on_grid():
    v, gold = _synthetic(2.0, 5000, seed=5)
    t = fit_temperature([v], [gold])
    grid = np.exp(np.linspace(math.log(0.05), math.log(20), 400))
    best = min(grid, key=lambda g: binary_nll([v], [gold], g))
    assert binary_nll([v], [gold], t) <= binary_nll([v], [gold], best) + 1e-9


def test_separated_data_hits_lower_bound():
    v = ScoreVector("x", (-5.0, -4.0, 4.0, 5.0), ScoreKind.LOGIT)
    assert fit_temperature([v], [(3, 4)]) == pytest.approx(0.05, rel=1e-3)


def test_single_class_rejected():
    v = ScoreVector("x", (0.1, 0.2), ScoreKind.LOGIT)
    with pytest.raises(CalibrationError):
        fit_temperature([v], [()])
    with pytest.raises(CalibrationError):
        fit_temperature([v], [(1, 2)])


def test_score_corpus_specs(tmp_path):
    ds = [make_dialogue("a", 5), make_dialogue("b", 3)]
    assert set(score_corpus(ds, "lexical")) == {"a", "b"}
    assert score_corpus(ds, "constant:0.7")["b"].scores == (0.7, 0.7)
    write_scores(tmp_path / "l.jsonl", [ScoreVector("a", (0.0,) * 4, ScoreKind.LOGIT),
                                        ScoreVector("b", (2.0, -2.0), ScoreKind.LOGIT)])
    out = score_corpus(ds, f"file:{tmp_path / 'l.jsonl'}", temperature=2.0)
    assert out["a"].kind is ScoreKind.PROBABILITY
    assert out["b"].scores[0] == pytest.approx(1 / (1 + math.exp(-1)))
    for bad in ("nope", "constant:x"):
        with pytest.raises(ValueError):
            score_corpus(ds, bad)
