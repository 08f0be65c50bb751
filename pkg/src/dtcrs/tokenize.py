"""Token counting used for every length limit in the pipeline.

All token budgets (chunk size, summary length, collapsed-tree budget) are
interpreted under a :class:`Tokenizer`. The default splits text into runs of
word characters and single punctuation marks, which is deterministic and
needs no model files.
"""

from __future__ import annotations

import re
from typing import Protocol

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class Tokenizer(Protocol):
    def spans(self, text: str) -> list[tuple[int, int]]: ...

    def count(self, text: str) -> int: ...


class WordPunctTokenizer:
    """Unicode word-and-punctuation tokenizer."""

    name = "wordpunct"

    def tokens(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text)

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]

    def count(self, text: str) -> int:
        return sum(1 for _ in _TOKEN_RE.finditer(text))


DEFAULT_TOKENIZER = WordPunctTokenizer()


def truncate(text: str, max_tokens: int, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> tuple[str, bool]:
    """Cut ``text`` after its ``max_tokens``-th token.

    Returns the (possibly shortened) text and whether anything was removed.
    """
    if max_tokens < 0:
        raise ValueError("max_tokens must be non-negative")
    spans = tokenizer.spans(text)
    if len(spans) <= max_tokens:
        return text, False
    if max_tokens == 0:
        return "", True
    return text[: spans[max_tokens - 1][1]], True
