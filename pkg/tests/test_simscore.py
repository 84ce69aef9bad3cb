import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import entropy_direct
from xlhwr.experiments import HmmConfig, SimilarityConfig, char_samples, lower_templates, train_char_models
from xlhwr.simscore import (char_similarity, entropy, entropy_record, format_matrix, normalized_entropy,
                            relative_similarity, run_similarity, script_similarity, similarity_matrix,
                            similarity_report)
from xlhwr.synthscript import random_script
from xlhwr.xmap import CoverageError


def test_entropy_examples():
    assert entropy({"A": 4}) == 0.0
    assert entropy({"A": 2, "B": 2}) == 1.0
    assert entropy({"A": 3, "B": 1}) == pytest.approx(0.8112781244591328, abs=1e-12)
    with pytest.raises(ValueError):
        entropy([0, 0])
    with pytest.raises(ValueError):
        entropy([2, -1])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=10).filter(any))
def test_entropy_matches_direct_sum(counts):
    assert entropy(counts) == pytest.approx(entropy_direct(counts), abs=1e-12)
    k = sum(1 for c in counts if c)
    assert 0.0 <= entropy(counts) <= math.log2(k) + 1e-12


def test_normalization():
    assert normalized_entropy(0.0, 1) == 0.0
    assert normalized_entropy(1.0, 2) == 0.5
    assert normalized_entropy(2.0, 4) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        normalized_entropy(2.0, 2)
    with pytest.raises(ValueError):
        normalized_entropy(0.0, 0)


@given(st.lists(st.integers(1, 40), min_size=1, max_size=12))
def test_normalized_entropy_below_one(counts):
    r = entropy_record("x", {str(i): c for i, c in enumerate(counts)})
    assert 0.0 <= r.hn < 1.0
    assert r.s == pytest.approx(1.0 - r.hn)


def test_char_similarity_bounds():
    assert char_similarity(0.0) == 1.0
    with pytest.raises(ValueError):
        char_similarity(1.0)


def test_script_similarity_examples():
    one = [entropy_record("a", {"x": 1, "y": 1})]              # H_N = 1/2
    assert script_similarity(one, [1.0]) == 0.5
    pure = [entropy_record("a", {"x": 5}), entropy_record("b", {"y": 5})]
    assert script_similarity(pure, [0.5, 0.5]) == 0.5
    with pytest.raises(ValueError):
        script_similarity(pure, [0.4, 0.4])
    with pytest.raises(ValueError):
        script_similarity(pure, [1.0])
    assert relative_similarity(0.25, 0.5) == 0.5
    with pytest.raises(ZeroDivisionError):
        relative_similarity(0.1, 0.0)


def test_report_with_callables():
    samples = {"a": [0, 1, 2, 3], "b": [4, 5, 6, 7]}
    mixed = run_similarity(None, samples, recognize=lambda x: "p" if x % 2 else "q",
                           recognize_self=lambda x: "a" if x < 4 else "b")
    assert mixed.weights == [0.5, 0.5]
    assert mixed.s_ref == 0.5
    assert mixed.s_sim == pytest.approx((1 - 0.5) / 2)
    assert mixed.s_rel == pytest.approx(0.5)
    assert mixed.to_tsv().splitlines()[0] == "char\tK\tH\tH_N\tS\tW"
    with pytest.raises(CoverageError):
        similarity_report({"a": [], "b": [1]}, str)


def test_matrix_text():
    text = format_matrix(["R", "T"], [[1.0, 0.5], [0.25, 1.0]])
    assert text == "target\\source\tR\tT\nR\t1.0000\t0.5000\nT\t0.2500\t1.0000\n"


@pytest.fixture(scope="module")
def two_scripts():
    cfg = SimilarityConfig(train_samples=6, test_samples=4, hmm=HmmConfig(nstates=4, nmix=1, iters=2))
    out = []
    for sid, seed in (("P", 3), ("Q", 5)):
        script = random_script(5, 1, 1, seed=seed, script_id=sid)
        models = train_char_models(script, cfg, seed)
        out.append((sid, models, char_samples(script, 4, seed + 50, lower_templates(script, seed))))
    return out


def test_self_relative_similarity_is_exactly_one(two_scripts):
    _, models, samples = two_scripts[0]
    assert run_similarity(models, samples, models).s_rel == 1.0


def test_matrix_diagonal(two_scripts):
    ids, rows = similarity_matrix(two_scripts)
    assert ids == ["P", "Q"]
    assert rows[0][0] == rows[1][1] == 1.0
    assert all(v > 0 for row in rows for v in row)
    with pytest.raises(ValueError):
        similarity_matrix(two_scripts[:1])
