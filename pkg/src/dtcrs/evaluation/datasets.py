"""Loaders for the QASPER, QuALITY and NarrativeQA release formats."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from ..model import Document, QuestionRecord

log = logging.getLogger(__name__)

KINDS = ("qasper", "quality", "narrativeqa")
QTYPES = ("extractive", "abstractive", "boolean", "unanswerable")


class DatasetError(ValueError):
    """The dataset file cannot be read or is not in the expected shape at all."""


@dataclass
class Dataset:
    documents: dict[str, Document] = field(default_factory=dict)
    questions: list[QuestionRecord] = field(default_factory=list)
    skipped: int = 0
    warnings: list[str] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        yield self.documents
        yield self.questions

    def _skip(self, where: str, exc: Exception) -> None:
        self.skipped += 1
        msg = f"skipped malformed record {where}: {exc}"
        self.warnings.append(msg)
        log.warning(msg)


# -- QASPER ---------------------------------------------------------------------

def _qasper_answer(ans: dict[str, Any]) -> tuple[str, str]:
    """(answer text, question type) for one annotation."""
    if ans.get("unanswerable"):
        return "Unanswerable", "unanswerable"
    spans = [s for s in ans.get("extractive_spans") or [] if s]
    if spans:
        return ", ".join(spans), "extractive"
    free = (ans.get("free_form_answer") or "").strip()
    if free:
        return free, "abstractive"
    if ans.get("yes_no") is not None:
        return ("Yes" if ans["yes_no"] else "No"), "boolean"
    raise ValueError("annotation has no answer")


def _qasper_text(paper: dict[str, Any]) -> str:
    parts = [paper.get("title", ""), paper.get("abstract", "")]
    for section in paper.get("full_text") or []:
        if section.get("section_name"):
            parts.append(section["section_name"])
        parts.extend(p for p in section.get("paragraphs") or [] if p)
    text = "\n\n".join(p.strip() for p in parts if p and p.strip())
    if not text:
        raise ValueError("paper has no text")
    return text


def _load_qasper(raw: str, ds: Dataset) -> None:
    data = json.loads(raw)
    if not isinstance(data, dict):
        raise DatasetError("QASPER file must hold an object keyed by paper id")
    for paper_id, paper in data.items():
        try:
            doc = Document(paper_id, paper.get("title", ""), _qasper_text(paper))
        except (AttributeError, TypeError, ValueError) as exc:
            ds._skip(f"paper {paper_id}", exc)
            continue
        ds.documents[paper_id] = doc
        for i, qa in enumerate(paper.get("qas") or []):
            try:
                answers, types, evidence = [], [], []
                for a in qa["answers"]:
                    text, qtype = _qasper_answer(a["answer"])
                    answers.append(text)
                    types.append(qtype)
                    evidence.extend(e for e in a["answer"].get("evidence") or [] if e)
                if not answers:
                    raise ValueError("no answers")
                ds.questions.append(QuestionRecord(
                    id=qa.get("question_id") or f"{paper_id}:{i}", doc_id=paper_id, text=qa["question"],
                    gold_answers=tuple(answers), gold_evidence=tuple(dict.fromkeys(evidence)), qtype=types[0]))
            except (KeyError, TypeError, ValueError) as exc:
                ds._skip(f"{paper_id} question {i}", exc)


# -- JSON lines formats ------------------------------------------------------------

def _jsonl(raw: str, ds: Dataset) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record is not an object")
        except ValueError as exc:
            ds._skip(f"line {lineno}", exc)
            continue
        yield lineno, obj


def _load_quality(raw: str, ds: Dataset) -> None:
    for lineno, rec in _jsonl(raw, ds):
        try:
            doc_id = rec["article_id"]
            doc = Document(doc_id, rec.get("title", ""), rec["article"])
            questions = []
            for j, q in enumerate(rec["questions"]):
                options = tuple(q["options"])
                gold = int(q["gold_label"]) - 1
                if not 0 <= gold < len(options):
                    raise ValueError(f"gold_label {q['gold_label']} outside 1..{len(options)}")
                questions.append(QuestionRecord(
                    id=q.get("question_unique_id") or f"{rec.get('set_unique_id', doc_id)}:{j}", doc_id=doc_id,
                    text=q["question"], gold_answers=(options[gold],), options=options, gold_option=gold,
                    qtype="hard" if q.get("difficult") else "easy"))
        except (KeyError, TypeError, ValueError) as exc:
            ds._skip(f"line {lineno}", exc)
            continue
        ds.documents[doc_id] = doc
        ds.questions.extend(questions)


def _load_narrativeqa(raw: str, ds: Dataset) -> None:
    for lineno, rec in _jsonl(raw, ds):
        try:
            d = rec["document"]
            doc_id = d["id"]
            title = (d.get("summary") or {}).get("title", "") if isinstance(d.get("summary"), dict) else ""
            answers = tuple(a["text"] for a in rec["answers"])
            if not answers:
                raise ValueError("no answers")
            q = QuestionRecord(id=rec.get("question_id") or f"{doc_id}:{lineno}", doc_id=doc_id,
                               text=rec["question"]["text"], gold_answers=answers, qtype="abstractive")
            if doc_id not in ds.documents:
                ds.documents[doc_id] = Document(doc_id, title, d["text"])
        except (KeyError, TypeError, ValueError) as exc:
            ds._skip(f"line {lineno}", exc)
            continue
        ds.questions.append(q)


_LOADERS = {"qasper": _load_qasper, "quality": _load_quality, "narrativeqa": _load_narrativeqa}


def load_dataset(kind: str, path: str | Path) -> Dataset:
    if kind not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    ds = Dataset()
    if not raw.strip():
        ds.warnings.append(f"{path}: empty dataset file")
        log.warning("%s: empty dataset file", path)
        return ds
    try:
        _LOADERS[kind](raw, ds)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: not valid JSON: {exc}") from exc
    return ds
