"""Inverted-index BM25 scoring with query-side saturation.

Per-unit score for unit text q and document d:

    sum over shared terms t of
        IDF(t)
        * f_d(t)*(k1+1) / (f_d(t) + k1*(1 - b + b*|d|/avgdl))
        * f_q(t)*(k3+1) / (f_q(t) + k3)

with IDF(t) = ln(1 + (N - df + 0.5)/(df + 0.5)), which is non-negative
for every df in [0, N].  Unit text is the sub-query and interpretation
concatenated into one bag of terms.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field

from .analysis import AnalyzerConfig, TokenSeq, analyze
from .corpus import CorpusStore
from .errors import InputError

import math

# ScoredList entries: (doc_id, score), strictly ordered by (-score, doc_id).
ScoredList = list[tuple[str, float]]

INDEX_FORMAT = "redi-sparse-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class SparseParams:
    """BM25 hyperparameters. k3 saturates query-side term frequency."""

    k1: float = 0.9
    b: float = 0.4
    k3: float = 0.4

    def __post_init__(self):
        if self.k1 < 0 or self.k3 < 0:
            raise InputError("k1 and k3 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise InputError("b must be in [0, 1]")


@dataclass
class SparseIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    N: int
    avgdl: float
    doc_freq: dict[str, int]
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)


def build_inverted_index(store: CorpusStore, config: AnalyzerConfig) -> SparseIndex:
    """Build postings over the analyzed tokens of every document.

    The passed config must match the one the store was ingested with,
    otherwise doc lengths and postings would disagree.
    """
    if not store.docs:
        raise InputError("cannot index an empty corpus store")
    if config != store.analyzer:
        raise InputError("analyzer config differs from the one used at ingestion")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc_id, doc in store.docs.items():
        seq = analyze(doc.text, config)
        doc_lengths[doc_id] = len(seq)
        for term, tf in seq.tf.items():
            postings.setdefault(term, []).append((doc_id, tf))
    for term in postings:
        postings[term].sort(key=lambda entry: entry[0])
    doc_freq = {term: len(plist) for term, plist in postings.items()}
    return SparseIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        N=store.num_docs,
        avgdl=store.avgdl,
        doc_freq=doc_freq,
        analyzer=config,
    )


def idf(term: str, index: SparseIndex) -> float:
    """ln(1 + (N - df + 0.5)/(df + 0.5)); unseen terms use df = 0."""
    df = index.doc_freq.get(term, 0)
    return math.log(1.0 + (index.N - df + 0.5) / (df + 0.5))


def query_saturation(f_q: float, k3: float) -> float:
    """Query-side term-frequency factor f_q*(k3+1)/(f_q+k3)."""
    return f_q * (k3 + 1.0) / (f_q + k3)


def _doc_factor(tf: int, doc_len: int, avgdl: float, params: SparseParams) -> float:
    denom = tf + params.k1 * (1.0 - params.b + params.b * doc_len / avgdl)
    return tf * (params.k1 + 1.0) / denom


def _term_weight(
    term: str, f_q: int, tf: int, doc_len: int, index: SparseIndex, params: SparseParams
) -> float:
    return (
        idf(term, index)
        * _doc_factor(tf, doc_len, index.avgdl, params)
        * query_saturation(f_q, params.k3)
    )


def _doc_tf(plist: list[tuple[str, int]], doc_id: str) -> int:
    i = bisect_left(plist, (doc_id,))
    if i < len(plist) and plist[i][0] == doc_id:
        return plist[i][1]
    return 0


def bm25_score(
    unit: TokenSeq, doc_id: str, index: SparseIndex, params: SparseParams
) -> float:
    """Score one document against an analyzed unit.

    Terms are visited in the unit's first-occurrence order so that
    retrieval and single-document scoring accumulate identically.
    """
    if doc_id not in index.doc_lengths:
        raise InputError(f"unknown doc_id {doc_id!r}")
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term, f_q in unit.tf.items():
        plist = index.postings.get(term)
        if plist is None:
            continue
        tf = _doc_tf(plist, doc_id)
        if tf == 0:
            continue
        score += _term_weight(term, f_q, tf, doc_len, index, params)
    return score


def top_k_entries(scores: dict[str, float], k: int | None) -> ScoredList:
    """Order (doc, score) pairs by (-score, doc_id) and truncate to k."""
    entries = sorted(scores.items(), key=lambda e: (-e[1], e[0]))
    if k is not None:
        entries = entries[:k]
    return entries


def unit_token_seq(unit, config: AnalyzerConfig) -> TokenSeq:
    """Analyze a retrieval unit's sub-query and interpretation as one bag."""
    text = unit.sub_query
    if unit.interpretation:
        text = text + " " + unit.interpretation
    return analyze(text, config)


def sparse_retrieve_topk(
    unit, index: SparseIndex, params: SparseParams, k: int
) -> ScoredList:
    """Top-k documents sharing at least one term with the unit text."""
    if k < 1:
        raise InputError("k must be >= 1")
    seq = unit_token_seq(unit, index.analyzer)
    scores: dict[str, float] = {}
    for term, f_q in seq.tf.items():
        plist = index.postings.get(term)
        if plist is None:
            continue
        idf_t = idf(term, index)
        sat = query_saturation(f_q, params.k3)
        for doc_id, tf in plist:
            # Same evaluation order as _term_weight so retrieval scores
            # equal bm25_score bit-for-bit.
            contrib = (
                idf_t
                * _doc_factor(tf, index.doc_lengths[doc_id], index.avgdl, params)
                * sat
            )
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    scores = {d: s for d, s in scores.items() if s != 0.0}
    return top_k_entries(scores, k)


# -- optional single-file serialization (internal, versioned) ---------------


def save_index(index: SparseIndex, path) -> None:
    """Serialize as versioned JSONL: header, doc lengths, sorted postings."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "n": index.N,
            "avgdl": index.avgdl,
            "analyzer": index.analyzer.to_dict(),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(json.dumps({"doc_lengths": index.doc_lengths}, sort_keys=True) + "\n")
        for term in sorted(index.postings):
            fh.write(
                json.dumps({"t": term, "p": index.postings[term]}, sort_keys=True)
                + "\n"
            )


def load_index(path) -> SparseIndex:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open index file {path}: {exc}") from exc
    with fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise InputError(f"{path}: truncated index file")
    header = json.loads(lines[0])
    if header.get("format") != INDEX_FORMAT:
        raise InputError(f"{path}: not a sparse index file")
    if header.get("version") != INDEX_VERSION:
        raise InputError(f"{path}: unsupported index version {header.get('version')}")
    doc_lengths = json.loads(lines[1])["doc_lengths"]
    postings: dict[str, list[tuple[str, int]]] = {}
    for line in lines[2:]:
        obj = json.loads(line)
        postings[obj["t"]] = [(doc_id, tf) for doc_id, tf in obj["p"]]
    doc_freq = {term: len(plist) for term, plist in postings.items()}
    return SparseIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        N=header["n"],
        avgdl=header["avgdl"],
        doc_freq=doc_freq,
        analyzer=AnalyzerConfig.from_dict(header["analyzer"]),
    )
