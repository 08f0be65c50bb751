import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtcrs.evaluation.metrics import (
    MeteorParams,
    RougeParams,
    bleu,
    choice_scores,
    freeform_scores,
    meteor,
    normalize_answer,
    rouge_l,
    token_f1,
)

WORDS = st.lists(st.sampled_from("ab cd ef gh ij kl".split()), min_size=1, max_size=12).map(" ".join)
PLAIN = RougeParams(stemming=False)


def wlcs_oracle(x, y, w):
    """Weighted LCS with f(k) = k**w, written from the recurrence directly."""
    m, n = len(x), len(y)
    c = [[0.0] * (n + 1) for _ in range(m + 1)]
    run = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if x[i - 1] == y[j - 1]:
                k = run[i - 1][j - 1]
                c[i][j] = c[i - 1][j - 1] + (k + 1) ** w - k ** w
                run[i][j] = k + 1
            elif c[i - 1][j] > c[i][j - 1]:
                c[i][j] = c[i - 1][j]
            else:
                c[i][j] = c[i][j - 1]
    return c[m][n]


def rouge_oracle(pred, ref, w=1.2, alpha=0.5):
    x, y = pred.split(), ref.split()
    s = wlcs_oracle(x, y, w)
    if s == 0:
        return 0.0
    p = (s / len(x) ** w) ** (1 / w)
    r = (s / len(y) ** w) ** (1 / w)
    return p * r / ((1 - alpha) * p + alpha * r)


# -- token F1 ---------------------------------------------------------------------

def test_normalize_answer():
    assert normalize_answer("The  Cat, sat!") == "cat sat"


@pytest.mark.parametrize("pred, refs, expected", [
    ("a b c", ["b c d"], 0.8),  # "a" is dropped as an article
    ("x y c", ["y c d"], 2 / 3),
    ("x", ["y", "x z"], 2 / 3),
    ("same", ["same"], 1.0),
    ("nothing", ["else"], 0.0),
    ("", [""], 1.0),
])
def test_token_f1_examples(pred, refs, expected):
    assert token_f1(pred, refs) == pytest.approx(expected)


def test_references_must_be_a_list():
    with pytest.raises(TypeError):
        token_f1("x", "x")
    with pytest.raises(ValueError):
        rouge_l("x", [])


# -- ROUGE-L ----------------------------------------------------------------------

def test_rouge_examples():
    assert rouge_l("the cat sat", ["the cat ran"], PLAIN) == pytest.approx(rouge_oracle("the cat sat", "the cat ran"))
    assert rouge_l("the cat sat", ["the cat sat"]) == pytest.approx(1.0)
    assert rouge_l("dogs", ["cats"]) == 0.0


def test_rouge_plain_lcs_when_weight_is_one():
    p = RougeParams(weight_factor=1.0, stemming=False)
    # LCS of 2 over lengths 3 and 4: P = 2/3, R = 1/2
    assert rouge_l("a b c", ["a x b y"], p) == pytest.approx(2 * (2 / 3) * 0.5 / (2 / 3 + 0.5))


@settings(max_examples=150, deadline=None)
@given(WORDS, WORDS)
def test_rouge_matches_oracle(pred, ref):
    assert rouge_l(pred, [ref], PLAIN) == pytest.approx(rouge_oracle(pred, ref), abs=1e-9)


def test_rouge_stemming_and_truncation():
    assert rouge_l("running dogs", ["run dog"]) == pytest.approx(1.0)
    assert rouge_l("running dogs", ["run dog"], PLAIN) == 0.0
    long = " ".join(["w"] * 100)
    assert rouge_l(long + " tail extra words", [long]) == pytest.approx(1.0)


def test_rouge_best_over_references():
    assert rouge_l("a b", ["x y", "a b"], PLAIN) == pytest.approx(1.0)
    mean = rouge_l("a b", ["x y", "a b"], RougeParams(stemming=False, apply_best=False))
    assert mean == pytest.approx(0.5)


# -- BLEU -------------------------------------------------------------------------

def bleu_oracle(pred, ref, n_max):
    p, r = pred.split(), ref.split()
    logs = 0.0
    for n in range(1, n_max + 1):
        grams = [tuple(p[i:i + n]) for i in range(len(p) - n + 1)]
        rgrams = [tuple(r[i:i + n]) for i in range(len(r) - n + 1)]
        if not grams:
            return 0.0
        clipped = sum(min(grams.count(g), rgrams.count(g)) for g in set(grams))
        if clipped == 0:
            return 0.0
        logs += math.log(clipped / len(grams))
    bp = 1.0 if len(p) > len(r) else math.exp(1 - len(r) / len(p))
    return bp * math.exp(logs / n_max)


def test_bleu_examples():
    assert bleu("the cat", ["the cat sat"], 1) == pytest.approx(math.exp(-0.5))
    assert bleu("the cat sat on the mat", ["the cat sat on the mat"]) == pytest.approx(1.0)
    assert bleu("a b", ["a b"], 4) == 0.0  # no 3-grams, no smoothing
    with pytest.raises(ValueError):
        bleu("a", ["a"], 0)


@settings(max_examples=150, deadline=None)
@given(WORDS, WORDS, st.sampled_from([1, 2, 4]))
def test_bleu_matches_oracle(pred, ref, n):
    assert bleu(pred, [ref], n) == pytest.approx(bleu_oracle(pred, ref, n), abs=1e-12)


# -- METEOR -------------------------------------------------------------------------

def test_meteor_identical_has_single_chunk_penalty():
    five = "one two three four five"
    assert meteor(five, [five]) == pytest.approx(1 - 0.5 * (1 / 5) ** 3)


def test_meteor_hand_example():
    # 3 matches in 2 chunks, P = 3/4, R = 3/3
    p, r = 0.75, 1.0
    f = p * r / (0.9 * p + 0.1 * r)
    expected = f * (1 - 0.5 * (2 / 3) ** 3)
    assert meteor("a b x c", ["a b c"]) == pytest.approx(expected)


def test_meteor_stem_stage_and_params():
    assert meteor("cats running", ["cat run"]) > 0.9
    assert meteor("zz", ["yy"]) == 0.0
    loose = MeteorParams(gamma=0.0)
    assert meteor("a b", ["a b"], loose) == pytest.approx(1.0)


# -- multiple choice -----------------------------------------------------------------

def test_choice_scores_examples():
    assert choice_scores([0, 1, 2, 3], [0, 1, 2, 0], 4) == pytest.approx((0.75, (3 - 1 / 3) / 4))
    assert choice_scores([1], [1], 4) == (1.0, 1.0)
    assert choice_scores([0], [1], 4) == pytest.approx((0.0, -1 / 3))
    assert choice_scores([0, 0], [1, 1], [2, 5]) == pytest.approx((0.0, (-1 - 0.25) / 2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=30))
def test_sat_random_guessing_is_zero_in_expectation(pairs):
    preds, golds = zip(*pairs)
    acc, sat = choice_scores(list(preds), list(golds), 4)
    n = len(pairs)
    c = round(acc * n)
    assert sat == pytest.approx((c - (n - c) / 3) / n)
    assert -1 / 3 - 1e-12 <= sat <= acc


def test_choice_scores_errors():
    with pytest.raises(ValueError):
        choice_scores([0], [0, 1], 4)
    with pytest.raises(ValueError):
        choice_scores([], [], 4)
    with pytest.raises(ValueError):
        choice_scores([0], [0], 1)


# -- invariants ------------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(WORDS, st.lists(WORDS, min_size=1, max_size=3))
def test_scores_are_bounded_and_best_of_refs(pred, refs):
    scores = freeform_scores(pred, refs)
    assert all(0.0 <= v <= 1.0 + 1e-12 for v in scores.values())
    assert scores["f1"] == pytest.approx(max(token_f1(pred, [r]) for r in refs))
    assert scores["rouge_l"] == pytest.approx(max(rouge_l(pred, [r]) for r in refs))


def test_perfect_answer_scores():
    s = freeform_scores("the quick brown fox jumps", ["the quick brown fox jumps"])
    assert s["f1"] == s["rouge_l"] == s["bleu1"] == s["bleu4"] == pytest.approx(1.0)
