"""One entry point per LLM step, with prompt rendering, temperatures and reply fallbacks."""

from __future__ import annotations

import logging
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from ..config import DEFAULT_TEMPERATURES
from ..model import Document, SubQuestionSet, TableOfContents
from ..tokenize import DEFAULT_TOKENIZER, Tokenizer, truncate
from . import parsing
from .providers import ChatProvider, LlmRequest

log = logging.getLogger(__name__)

# reply length caps per step (summaries use the configured summary length)
MAX_TOKENS = {"toc": 512, "classify": 4, "decompose": 256, "answer_freeform": 256, "answer_choice": 8}


@lru_cache(maxsize=None)
def load_template(step: str) -> str:
    return resources.files("dtcrs.llm").joinpath("prompts", f"{step}.txt").read_text(encoding="utf-8")


@dataclass(frozen=True)
class Summary:
    text: str
    truncated: bool = False


class LlmGateway:
    """Renders prompts, routes them to a provider and parses replies.

    Parse failures never raise: each step has a documented fallback and the
    event is counted in :attr:`fallbacks`. Only :class:`TransportError` from
    the provider propagates.
    """

    def __init__(self, provider: ChatProvider, *, temperatures: Mapping[str, float] | None = None,
                 tokenizer: Tokenizer = DEFAULT_TOKENIZER, context_limit_tokens: int = 100_000,
                 max_concurrency: int = 4, templates: Mapping[str, str] | None = None):
        self.provider = provider
        self.temperatures = dict(DEFAULT_TEMPERATURES)
        self.temperatures.update(temperatures or {})
        self.tokenizer = tokenizer
        self.context_limit_tokens = context_limit_tokens
        self.templates = dict(templates or {})
        self.fallbacks: Counter[str] = Counter()
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._lock = threading.Lock()

    def _template(self, step: str) -> str:
        return self.templates.get(step) or load_template(step)

    def _note(self, event: str, detail: str) -> None:
        with self._lock:
            self.fallbacks[event] += 1
        log.warning("%s: %s", event, detail)

    def call(self, step: str, max_tokens: int, **variables) -> str:
        rendered = {k: v for k, v in variables.items() if isinstance(v, str)}
        prompt = self._template(step).format(**rendered)
        request = LlmRequest(step, prompt, self.temperatures[step], max_tokens, variables)
        with self._slots:
            return self.provider.complete(request)

    # -- steps -----------------------------------------------------------------

    def generate_toc(self, document: Document) -> TableOfContents:
        text, truncated = truncate(document.text, self.context_limit_tokens, self.tokenizer)
        raw = self.call("toc", MAX_TOKENS["toc"], document=text)
        entries = parsing.parse_toc(raw)
        if not entries:
            self._note("toc_parse_fallback", f"document {document.id}: unparseable table of contents")
            return TableOfContents(((1, raw.strip()),), raw, truncated=truncated, degraded=True)
        return TableOfContents(tuple(entries), raw, truncated=truncated)

    def classify_question(self, question: str, toc: TableOfContents) -> int:
        if not question.strip():
            raise ValueError("question must be non-empty")
        raw = self.call("classify", MAX_TOKENS["classify"], question=question, toc=toc.render())
        label = parsing.parse_label(raw)
        if label is None:
            self._note("classify_parse_fallback", f"unparseable label {raw!r}; using 0")
            return 0
        return label

    def decompose_question(self, question: str, toc: TableOfContents, question_id: str = "",
                           include_toc: bool = True) -> SubQuestionSet:
        if not question.strip():
            raise ValueError("question must be non-empty")
        use_toc = include_toc and bool(toc.entries)
        toc_block = f"Base the sub-questions on this table of contents:\n{toc.render()}\n" if use_toc else ""
        raw = self.call("decompose", MAX_TOKENS["decompose"], question=question, toc_block=toc_block,
                        toc_entries=toc.entries if use_toc else ())
        items = parsing.parse_list(raw)
        if not items:
            self._note("decompose_fallback", "no sub-questions parsed; using the original question")
            return SubQuestionSet(question_id, (question,), fallback=True)
        return SubQuestionSet(question_id, tuple(items))

    def summarize_cluster(self, texts: Sequence[str], max_tokens: int = 100) -> Summary:
        if not texts:
            raise ValueError("summarize_cluster needs at least one text")
        context, _ = truncate("\n\n".join(texts), self.context_limit_tokens, self.tokenizer)
        raw = self.call("summarize", max_tokens, context=context, context_items=tuple(texts))
        text, cut = truncate(raw.strip(), max_tokens, self.tokenizer)
        if cut:
            self._note("summary_truncated", f"summary cut to {max_tokens} tokens")
        return Summary(text, cut)

    def pack_context(self, context: Sequence[str]) -> list[str]:
        """Keep context items in rank order until the provider limit would be exceeded."""
        packed, used = [], 0
        for item in context:
            n = self.tokenizer.count(item)
            if used + n > self.context_limit_tokens:
                break
            packed.append(item)
            used += n
        return packed

    def answer(self, question: str, context: Sequence[str], options: Sequence[str] | None = None) -> str | int:
        items = self.pack_context(context)
        joined = "\n\n".join(items)
        if options is None:
            raw = self.call("answer_freeform", MAX_TOKENS["answer_freeform"], question=question,
                            context=joined, context_items=tuple(items))
            return parsing.strip_answer_label(raw)
        rendered = "\n".join(f"{chr(ord('A') + i)}. {opt}" for i, opt in enumerate(options))
        raw = self.call("answer_choice", MAX_TOKENS["answer_choice"], question=question, context=joined,
                        options=rendered, context_items=tuple(items), option_list=tuple(options))
        choice = parsing.parse_choice(raw, len(options))
        if choice is None:
            self._note("choice_parse_fallback", f"unparseable choice {raw!r}; using option 0")
            return 0
        return choice
