"""Answer-quality metrics: token F1, ROUGE-L, BLEU, METEOR and multiple-choice scores.

Every text metric takes one prediction and a list of references and reports
the best score over the references.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .. import _kernels

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)
_WORD = re.compile(r"[a-z0-9]+")


def _check_refs(references: Sequence[str]) -> Sequence[str]:
    if isinstance(references, str):
        raise TypeError("references must be a list of strings")
    if not references:
        raise ValueError("need at least one reference")
    return references


# -- token F1 -------------------------------------------------------------------

def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and English articles, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _f1_tokens(pred: list[str], ref: list[str]) -> float:
    if not pred or not ref:
        return float(pred == ref)
    same = sum((Counter(pred) & Counter(ref)).values())
    if same == 0:
        return 0.0
    p, r = same / len(pred), same / len(ref)
    return 2 * p * r / (p + r)


def token_f1(prediction: str, references: Sequence[str]) -> float:
    pred = normalize_answer(prediction).split()
    return max(_f1_tokens(pred, normalize_answer(r).split()) for r in _check_refs(references))


# -- ROUGE-L --------------------------------------------------------------------

@dataclass(frozen=True)
class RougeParams:
    limit_length: int | None = 100
    alpha: float = 0.5
    weight_factor: float = 1.2
    stemming: bool = True
    apply_best: bool = True


@lru_cache(maxsize=1)
def _stemmer():
    from nltk.stem.porter import PorterStemmer

    return PorterStemmer()


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    return _stemmer().stem(token)


def rouge_tokens(text: str, params: RougeParams = RougeParams()) -> list[str]:
    tokens = _WORD.findall(text.lower())
    if params.limit_length is not None:
        tokens = tokens[: params.limit_length]
    if params.stemming:
        tokens = [stem(t) for t in tokens]
    return tokens


def _rouge_pair(pred: list[str], ref: list[str], p: RougeParams) -> float:
    if not pred or not ref:
        return float(pred == ref)
    vocab: dict[str, int] = {}
    a = [vocab.setdefault(t, len(vocab)) for t in pred]
    b = [vocab.setdefault(t, len(vocab)) for t in ref]
    w = p.weight_factor
    score = _kernels.wlcs(a, b, w)
    if score <= 0:
        return 0.0
    precision = (score / len(pred) ** w) ** (1.0 / w)
    recall = (score / len(ref) ** w) ** (1.0 / w)
    return precision * recall / ((1 - p.alpha) * precision + p.alpha * recall)


def rouge_l(prediction: str, references: Sequence[str], params: RougeParams = RougeParams()) -> float:
    """Weighted-LCS ROUGE F-measure; ``weight_factor=1`` gives plain ROUGE-L."""
    pred = rouge_tokens(prediction, params)
    scores = [_rouge_pair(pred, rouge_tokens(r, params), params) for r in _check_refs(references)]
    return max(scores) if params.apply_best else sum(scores) / len(scores)


# -- BLEU -----------------------------------------------------------------------

def _plain_tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _bleu_pair(pred: list[str], ref: list[str], max_n: int) -> float:
    if not pred or not ref:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = _ngrams(pred, n)
        total = sum(cand.values())
        clipped = sum((cand & _ngrams(ref, n)).values())
        if total == 0 or clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    c, r = len(pred), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_sum / max_n)


def bleu(prediction: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with uniform weights and brevity penalty, no smoothing."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    pred = _plain_tokens(prediction)
    return max(_bleu_pair(pred, _plain_tokens(r), max_n) for r in _check_refs(references))


# -- METEOR ---------------------------------------------------------------------

@dataclass(frozen=True)
class MeteorParams:
    alpha: float = 0.9
    beta: float = 3.0
    gamma: float = 0.5


def _align(pred: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Exact matches first, then stem matches; each stage pairs left to right."""
    pairs: list[tuple[int, int]] = []
    used_p: set[int] = set()
    used_r: set[int] = set()
    for key in (lambda t: t, stem):
        pk = [key(t) for t in pred]
        rk = [key(t) for t in ref]
        for i, tok in enumerate(pk):
            if i in used_p:
                continue
            for j, other in enumerate(rk):
                if j not in used_r and tok == other:
                    pairs.append((i, j))
                    used_p.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def _chunks(pairs: list[tuple[int, int]]) -> int:
    count, prev = 0, None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            count += 1
        prev = (i, j)
    return count


def _meteor_pair(pred: list[str], ref: list[str], p: MeteorParams) -> float:
    if not pred or not ref:
        return 0.0
    pairs = _align(pred, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision, recall = m / len(pred), m / len(ref)
    fmean = precision * recall / (p.alpha * precision + (1 - p.alpha) * recall)
    penalty = p.gamma * (_chunks(pairs) / m) ** p.beta
    return fmean * (1 - penalty)


def meteor(prediction: str, references: Sequence[str], params: MeteorParams = MeteorParams()) -> float:
    pred = _plain_tokens(prediction)
    return max(_meteor_pair(pred, _plain_tokens(r), params) for r in _check_refs(references))


# -- multiple choice ------------------------------------------------------------

def choice_scores(predictions: Sequence[int], golds: Sequence[int], options_count) -> tuple[float, float]:
    """Accuracy and the guess-penalized score ``(C - W/(k-1)) / N``.

    ``options_count`` is one ``k`` for all questions or a per-question list.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions for {len(golds)} gold labels")
    if not predictions:
        raise ValueError("no predictions")
    ks = [options_count] * len(golds) if isinstance(options_count, int) else list(options_count)
    if len(ks) != len(golds) or min(ks) < 2:
        raise ValueError("options_count must be >= 2 for every question")
    correct = 0
    penalized = 0.0
    for p, g, k in zip(predictions, golds, ks):
        if p == g:
            correct += 1
            penalized += 1.0
        else:
            penalized -= 1.0 / (k - 1)
    n = len(golds)
    return correct / n, penalized / n


def freeform_scores(prediction: str, references: Sequence[str]) -> dict[str, float]:
    return {
        "f1": token_f1(prediction, references),
        "rouge_l": rouge_l(prediction, references),
        "bleu1": bleu(prediction, references, 1),
        "bleu4": bleu(prediction, references, 4),
        "meteor": meteor(prediction, references),
    }
