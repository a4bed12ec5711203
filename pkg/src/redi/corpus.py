"""Corpus ingestion and statistics.

Corpora arrive as JSONL: one object per line with string fields "doc_id"
and "text" (unknown keys ignored).  A completed CorpusStore is immutable
in practice and safe to share across readers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .analysis import AnalyzerConfig, analyze
from .errors import InputError


@dataclass
class Document:
    doc_id: str
    text: str
    length_tokens: int = 0


@dataclass
class CorpusStore:
    docs: dict[str, Document]
    num_docs: int
    avgdl: float
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)


def ingest_corpus(path, config: AnalyzerConfig) -> CorpusStore:
    """Read a JSONL corpus file, analyzing each document for its length.

    Raises InputError on malformed lines (with line number), duplicate
    doc_ids, or an empty file.
    """
    docs: dict[str, Document] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open corpus file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            doc_id = obj.get("doc_id")
            text = obj.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                raise InputError(f"{path}:{lineno}: missing or empty 'doc_id'")
            if not isinstance(text, str):
                raise InputError(f"{path}:{lineno}: missing 'text'")
            if doc_id in docs:
                raise InputError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            length = len(analyze(text, config))
            docs[doc_id] = Document(doc_id=doc_id, text=text, length_tokens=length)
    if not docs:
        raise InputError(f"{path}: empty corpus")
    total = sum(d.length_tokens for d in docs.values())
    return CorpusStore(
        docs=docs,
        num_docs=len(docs),
        avgdl=total / len(docs),
        analyzer=config,
    )


def corpus_stats(store: CorpusStore) -> tuple[int, float]:
    """Return (N, avgdl); recomputing from docs must match the stored values."""
    if not store.docs:
        raise InputError("empty corpus store")
    recomputed = sum(d.length_tokens for d in store.docs.values()) / store.num_docs
    if not math.isclose(recomputed, store.avgdl, rel_tol=0, abs_tol=1e-12):
        raise InputError(
            f"corpus store inconsistent: stored avgdl {store.avgdl} != {recomputed}"
        )
    return store.num_docs, store.avgdl
