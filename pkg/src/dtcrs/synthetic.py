"""Synthetic topic-blob corpora for offline tests, benchmarks and demos.

Every topic owns a disjoint vocabulary of made-up words. A chunk draws its
words from one topic only, so under the hash embedder chunks of the same
topic land near a common centroid. The sub-question for a topic lists that
topic's vocabulary once, which embeds close to the centroid as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Chunk, Document, SubQuestionSet
from .tokenize import DEFAULT_TOKENIZER

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SyntheticCorpus:
    document: Document
    chunks: tuple[Chunk, ...]
    labels: tuple[int, ...]
    vocabularies: tuple[tuple[str, ...], ...]

    @property
    def n_topics(self) -> int:
        return len(self.vocabularies)

    def topic_questions(self) -> tuple[str, ...]:
        return tuple(" ".join(v) + "?" for v in self.vocabularies)

    def subquestions(self, question_id: str = "q0", topics: list[int] | None = None) -> SubQuestionSet:
        qs = self.topic_questions()
        picked = tuple(qs[t] for t in (topics if topics is not None else range(self.n_topics)))
        return SubQuestionSet(question_id, picked)


def _vocabularies(n_topics: int, size: int, rng: np.random.Generator) -> list[tuple[str, ...]]:
    seen: set[str] = set()
    out = []
    for _ in range(n_topics):
        words: list[str] = []
        while len(words) < size:
            syll = rng.integers(2, 4)
            w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                        for _ in range(syll))
            if w not in seen:
                seen.add(w)
                words.append(w)
        out.append(tuple(words))
    return out


def _chunk_text(words: tuple[str, ...], n_words: int, rng: np.random.Generator, sentence_len: int = 10) -> str:
    picks = [words[i] for i in rng.integers(len(words), size=n_words)]
    sentences = []
    for i in range(0, n_words, sentence_len):
        part = picks[i:i + sentence_len]
        sentences.append(" ".join([part[0].capitalize(), *part[1:]]) + ".")
    return " ".join(sentences)


def make_topic_corpus(n_chunks: int, n_topics: int, seed: int = 0, *, words_per_chunk: int = 40,
                      vocab_size: int = 12, doc_id: str = "synthetic", shuffle: bool = True) -> SyntheticCorpus:
    """Corpus of ``n_chunks`` chunks spread evenly over ``n_topics`` topics.

    With ``shuffle`` the topic order along the document is random; otherwise
    topics appear in contiguous sections.
    """
    if n_topics < 1 or n_chunks < n_topics:
        raise ValueError("need 1 <= n_topics <= n_chunks")
    rng = np.random.default_rng(seed)
    vocab = _vocabularies(n_topics, vocab_size, rng)
    labels = np.arange(n_chunks) % n_topics
    if shuffle:
        rng.shuffle(labels)
    else:
        labels = np.sort(labels)
    texts = [_chunk_text(vocab[t], words_per_chunk, rng) for t in labels]
    chunks = tuple(
        Chunk(f"{doc_id}#{i:05d}", doc_id, i, t, DEFAULT_TOKENIZER.count(t)) for i, t in enumerate(texts)
    )
    document = Document(doc_id, f"Synthetic corpus {seed}", "\n\n".join(texts))
    return SyntheticCorpus(document, chunks, tuple(int(t) for t in labels), tuple(vocab))


def make_long_document(target_tokens: int, n_topics: int = 8, seed: int = 0, doc_id: str = "long") -> SyntheticCorpus:
    """Topic corpus in contiguous sections with roughly ``target_tokens`` tokens."""
    words_per_chunk = 400
    tokens_per_chunk = words_per_chunk + words_per_chunk // 10
    n_chunks = max(n_topics, -(-target_tokens // tokens_per_chunk))
    return make_topic_corpus(n_chunks, n_topics, seed, words_per_chunk=words_per_chunk, doc_id=doc_id,
                             shuffle=False)
