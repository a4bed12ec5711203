"""Ranking metrics and TREC-format run/qrels I/O.

nDCG@k uses exponential gain (2^rel - 1) and a log2(i+1) discount, the
trec-eval family default; with binary relevance this coincides with
linear gain.  Metrics are rank-only: they read the run's order, never
re-sort by score.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import InputError

Qrels = dict[str, dict[str, int]]  # query_id -> doc_id -> grade >= 0


@dataclass
class RunFile:
    """Per-query ranked (doc_id, score) lists, rank order = list order."""

    entries: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    tag: str = "redi"


@dataclass
class MetricReport:
    metric: str
    k: int
    per_query: dict[str, float]
    mean: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "k": self.k,
            "mean": self.mean,
            "per_query": self.per_query,
        }


def _mean(values) -> float:
    values = list(values)
    if not values:
        return 0.0
    return math.fsum(values) / len(values)


def _relevant_docs(grades: dict[str, int]) -> set[str]:
    return {doc_id for doc_id, grade in grades.items() if grade > 0}


def _gain(grade: int) -> float:
    return float(2**grade - 1)


def _select_queries(run: RunFile, qrels: Qrels, missing: str):
    if missing not in ("skip", "error"):
        raise InputError(f"unknown missing-query policy {missing!r}")
    selected = []
    for query_id in run.entries:
        if query_id not in qrels:
            if missing == "error":
                raise InputError(f"run query {query_id!r} absent from qrels")
            continue
        selected.append(query_id)
    return selected


def ndcg_at_k(run: RunFile, qrels: Qrels, k: int, missing: str = "skip",
              include_zero_relevant: bool = True) -> MetricReport:
    """Macro-averaged nDCG@k; zero-relevant queries score 0 and count."""
    if k < 1:
        raise InputError("k must be >= 1")
    per_query: dict[str, float] = {}
    for query_id in _select_queries(run, qrels, missing):
        grades = qrels[query_id]
        ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
        if not ideal:
            if include_zero_relevant:
                per_query[query_id] = 0.0
            continue
        dcg = 0.0
        for i, (doc_id, _) in enumerate(run.entries[query_id][:k], start=1):
            grade = grades.get(doc_id, 0)
            if grade > 0:
                dcg += _gain(grade) / math.log2(i + 1)
        idcg = 0.0
        for i, grade in enumerate(ideal[:k], start=1):
            idcg += _gain(grade) / math.log2(i + 1)
        per_query[query_id] = dcg / idcg
    return MetricReport(
        metric="ndcg", k=k, per_query=per_query, mean=_mean(per_query.values())
    )


def recall_at_k(run: RunFile, qrels: Qrels, k: int, missing: str = "skip",
                include_zero_relevant: bool = True) -> MetricReport:
    """Fraction of a query's relevant docs (grade > 0) found in the top k."""
    if k < 1:
        raise InputError("k must be >= 1")
    per_query: dict[str, float] = {}
    for query_id in _select_queries(run, qrels, missing):
        relevant = _relevant_docs(qrels[query_id])
        if not relevant:
            if include_zero_relevant:
                per_query[query_id] = 0.0
            continue
        top = {doc_id for doc_id, _ in run.entries[query_id][:k]}
        per_query[query_id] = len(relevant & top) / len(relevant)
    return MetricReport(
        metric="recall", k=k, per_query=per_query, mean=_mean(per_query.values())
    )


# -- TREC file formats --------------------------------------------------------


def read_qrels(path) -> Qrels:
    """Lines of "query_id 0 doc_id grade", whitespace-separated."""
    qrels: Qrels = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open qrels file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            query_id, _, doc_id, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-integer grade {grade_str!r}")
            if grade < 0:
                raise InputError(f"{path}:{lineno}: negative grade {grade}")
            qrels.setdefault(query_id, {})[doc_id] = grade
    if not qrels:
        raise InputError(f"{path}: empty qrels file")
    return qrels


def write_run(path, run: RunFile) -> None:
    """Lines of "query_id Q0 doc_id rank score tag"."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id, entries in run.entries.items():
            for rank, (doc_id, score) in enumerate(entries, start=1):
                fh.write(f"{query_id} Q0 {doc_id} {rank} {score:.6f} {run.tag}\n")


def read_run(path) -> RunFile:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open run file {path}: {exc}") from exc
    entries: dict[str, list[tuple[str, float]]] = {}
    tag = "redi"
    last_seen: dict[str, tuple[int, float]] = {}
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise InputError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            query_id, _, doc_id, rank_str, score_str, tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: bad rank/score: {exc}") from exc
            per_query = entries.setdefault(query_id, [])
            prev = last_seen.get(query_id)
            if rank != len(per_query) + 1:
                raise InputError(
                    f"{path}:{lineno}: rank {rank} not contiguous for {query_id!r}"
                )
            if prev is not None and score > prev[1]:
                raise InputError(
                    f"{path}:{lineno}: score increases with rank for {query_id!r}"
                )
            if any(doc_id == d for d, _ in per_query):
                raise InputError(
                    f"{path}:{lineno}: duplicate doc {doc_id!r} for {query_id!r}"
                )
            per_query.append((doc_id, score))
            last_seen[query_id] = (rank, score)
    if not entries:
        raise InputError(f"{path}: empty run file")
    return RunFile(entries=entries, tag=tag)


def write_report_json(path, reports: list[MetricReport]) -> None:
    """Machine-readable report: one object per metric, stable key order."""
    payload = [r.to_dict() for r in reports]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_report_table(reports: list[MetricReport],
                        groups: dict[str, str] | None = None) -> str:
    """Human-readable metric table (stdout); optional per-group macro rows."""
    lines = []
    header = "metric        mean    queries"
    lines.append(header)
    lines.append("-" * len(header))
    for r in reports:
        name = f"{r.metric}@{r.k}"
        lines.append(f"{name:<13} {r.mean:.4f}  {len(r.per_query)}")
    if groups:
        lines.append("")
        lines.append("per-group macro means")
        for r in reports:
            by_group: dict[str, list[float]] = {}
            for query_id, value in r.per_query.items():
                group = groups.get(query_id, "(ungrouped)")
                by_group.setdefault(group, []).append(value)
            for group in sorted(by_group):
                lines.append(
                    f"  {r.metric}@{r.k} {group}: {_mean(by_group[group]):.4f}"
                )
    return "\n".join(lines)
