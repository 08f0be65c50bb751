"""Parsers that turn free-text LLM replies into structured values.

Parsers never raise on odd replies; they return ``None`` (or an empty
result) and let the gateway apply its fallback.
"""

from __future__ import annotations

import re
import string

_NUMBERED = re.compile(r"^\s*(\d+(?:\.\d+)*)[.)]?\s+(.+?)\s*$")
_MARKDOWN = re.compile(r"^\s*(#{1,6})\s+(.+?)\s*$")
_BULLET = re.compile(r"^(\s*)[-*•]\s+(.+?)\s*$")

POSITIVE = {"1", "yes", "y", "true", "abstractive", "complex"}
NEGATIVE = {"0", "no", "n", "false", "simple", "extractive", "not"}

_LABEL_PREFIX = re.compile(r"^\s*(?:final\s+answer|answer|a)\s*[:\-]\s*", re.IGNORECASE)


def parse_toc(reply: str) -> list[tuple[int, str]]:
    entries = []
    for line in reply.splitlines():
        if m := _NUMBERED.match(line):
            entries.append((m.group(1).count(".") + 1, m.group(2)))
        elif m := _MARKDOWN.match(line):
            entries.append((len(m.group(1)), m.group(2)))
        elif m := _BULLET.match(line):
            entries.append((len(m.group(1).expandtabs(4)) // 2 + 1, m.group(2)))
    return entries


def parse_label(reply: str) -> int | None:
    """First yes/no-style token in the reply, as 1 or 0."""
    for token in re.findall(r"\w+", reply.lower()):
        if token in POSITIVE:
            return 1
        if token in NEGATIVE:
            return 0
    return None


def parse_list(reply: str) -> list[str]:
    """Items of a numbered or bulleted list; plain lines if nothing is marked."""
    marked, plain = [], []
    for line in reply.splitlines():
        if not line.strip():
            continue
        m = _NUMBERED.match(line) or _BULLET.match(line)
        if m:
            marked.append(m.group(2).strip())
        else:
            plain.append(line.strip())
    items = marked or plain
    return [i for i in items if i.strip(string.punctuation + " ")]


def strip_answer_label(reply: str) -> str:
    text = reply.strip()
    text = _LABEL_PREFIX.sub("", text, count=1).strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1].strip()
    return text


def parse_choice(reply: str, n_options: int) -> int | None:
    """0-based option index from a reply such as ``B``, ``(b)``, ``Answer: C`` or ``2``."""
    text = strip_answer_label(reply)
    text = re.sub(r"^(?:option|choice)\s*", "", text, flags=re.IGNORECASE)
    m = re.match(r"^\W*\(?([A-Za-z])\)?(?:[\s.:)\-]|$)", text)
    if m:
        idx = ord(m.group(1).upper()) - ord("A")
    else:
        m = re.match(r"^\W*(\d+)\b", text)
        if not m:
            return None
        idx = int(m.group(1)) - 1
    return idx if 0 <= idx < n_options else None
