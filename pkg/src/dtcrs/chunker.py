"""Fixed-size, sentence-aligned chunking.

Sentences are packed greedily into chunks of at most ``limit`` tokens. A
sentence that would cross the boundary is moved whole into the next chunk,
so no chunk ever holds a partial sentence.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .model import Chunk, Document
from .tokenize import DEFAULT_TOKENIZER, Tokenizer

log = logging.getLogger(__name__)

ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "cf",
    "al", "fig", "figs", "eq", "eqs", "no", "vol", "pp", "approx", "dept", "inc", "ltd", "co",
    "corp", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    "gen", "col", "lt", "sgt", "capt", "rev", "sec", "ch", "ca", "resp",
})

# terminator run, optional closing quotes/brackets, then whitespace or end of text
_BOUNDARY_RE = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")
_WORD_BEFORE_RE = re.compile(r"([\w.]+)$")


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int
    token_count: int


def _is_abbreviation(text: str, dot_pos: int) -> bool:
    if text[dot_pos] != ".":
        return False
    # abbreviations are short; a bounded window keeps this linear in the text length
    m = _WORD_BEFORE_RE.search(text, max(0, dot_pos - 16), dot_pos)
    if not m:
        return False
    return m.group(1).lower().rstrip(".") in ABBREVIATIONS


def split_sentences(text: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> list[SentenceSpan]:
    """Split ``text`` into sentence spans (character offsets into ``text``)."""
    spans: list[SentenceSpan] = []
    pos = 0

    def emit(s: int, e: int) -> None:
        spans.append(SentenceSpan(s, e, tokenizer.count(text[s:e])))

    for m in _BOUNDARY_RE.finditer(text):
        if _is_abbreviation(text, m.start()) and m.end() - m.start() == 1:
            continue
        s = _skip_space(text, pos)
        if s < m.end():
            emit(s, m.end())
        pos = m.end()
    s = _skip_space(text, pos)
    if s < len(text):
        end = len(text.rstrip())
        emit(s, end)
    return spans


def _skip_space(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def pack_sentences(token_counts: list[int], limit: int) -> list[list[int]]:
    """Greedy packing of sentence indices into groups of at most ``limit`` tokens."""
    if limit <= 0:
        raise ValueError("limit must be positive")
    groups: list[list[int]] = []
    current: list[int] = []
    total = 0
    for i, n in enumerate(token_counts):
        if current and total + n > limit:
            groups.append(current)
            current, total = [], 0
        current.append(i)
        total += n
    if current:
        groups.append(current)
    return groups


def chunk(document: Document, limit: int = 500, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> list[Chunk]:
    sentences = split_sentences(document.text, tokenizer)
    groups = pack_sentences([s.token_count for s in sentences], limit)
    chunks = []
    for index, group in enumerate(groups):
        first, last = sentences[group[0]], sentences[group[-1]]
        tokens = sum(sentences[i].token_count for i in group)
        if tokens > limit:
            log.warning("document %s: sentence of %d tokens exceeds chunk limit %d; kept whole",
                        document.id, tokens, limit)
        chunks.append(Chunk(
            id=f"{document.id}#{index:05d}",
            doc_id=document.id,
            index=index,
            text=document.text[first.start:last.end],
            token_count=tokens,
        ))
    return chunks
