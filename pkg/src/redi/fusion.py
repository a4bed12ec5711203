"""Aggregate per-unit ranked lists into one final ranking.

sum  - per-doc sum of scores across the lists that contain it
max  - per-doc maximum
rrf  - per-doc sum of 1/(rrf_k + rank), rank starting at 1 in each list
concat - resolved before retrieval: units merged into a single unit

Per-doc contributions are combined with math.fsum, so fusing a permuted
list-of-lists yields a bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError
from .sparse import ScoredList, top_k_entries
from .understanding import RetrievalUnit, UnitSet

FUSION_METHODS = ("sum", "max", "rrf", "concat")


@dataclass(frozen=True)
class FusionConfig:
    method: str = "sum"
    rrf_k: float = 60.0
    final_depth: int = 100

    def __post_init__(self):
        if self.method not in FUSION_METHODS:
            raise InputError(f"unknown fusion method {self.method!r}")
        if self.rrf_k <= 0:
            raise InputError("rrf_k must be > 0")
        if self.final_depth < 1:
            raise InputError("final_depth must be >= 1")


def _gather(lists: list[ScoredList]) -> dict[str, list[float]]:
    per_doc: dict[str, list[float]] = {}
    for entries in lists:
        for doc_id, score in entries:
            per_doc.setdefault(doc_id, []).append(score)
    return per_doc


def fuse_sum(lists: list[ScoredList], depth: int | None = 100) -> ScoredList:
    """Per-doc sum over the lists containing it; absent lists contribute 0."""
    if not lists:
        raise InputError("fuse_sum requires at least one list")
    per_doc = _gather(lists)
    fused = {doc_id: math.fsum(scores) for doc_id, scores in per_doc.items()}
    return top_k_entries(fused, depth)


def fuse_max(lists: list[ScoredList], depth: int | None = 100) -> ScoredList:
    if not lists:
        raise InputError("fuse_max requires at least one list")
    per_doc = _gather(lists)
    fused = {doc_id: max(scores) for doc_id, scores in per_doc.items()}
    return top_k_entries(fused, depth)


def fuse_rrf(
    lists: list[ScoredList], rrf_k: float = 60.0, depth: int | None = 100
) -> ScoredList:
    if not lists:
        raise InputError("fuse_rrf requires at least one list")
    if rrf_k <= 0:
        raise InputError("rrf_k must be > 0")
    per_doc: dict[str, list[float]] = {}
    for entries in lists:
        for rank, (doc_id, _) in enumerate(entries, start=1):
            per_doc.setdefault(doc_id, []).append(1.0 / (rrf_k + rank))
    fused = {doc_id: math.fsum(vals) for doc_id, vals in per_doc.items()}
    return top_k_entries(fused, depth)


def concat_units(units: UnitSet) -> RetrievalUnit:
    """Merge all units into one: sub-queries and interpretations joined."""
    if not units.units:
        raise InputError("cannot concat an empty unit set")
    if len(units.units) == 1:
        return units.units[0]
    sub_query = " ".join(u.sub_query for u in units.units)
    interpretation = " ".join(u.interpretation for u in units.units if u.interpretation)
    return RetrievalUnit(
        unit_id=f"q{units.query_id}#concat",
        sub_query=sub_query,
        interpretation=interpretation,
    )


def fuse(
    lists: list[ScoredList], config: FusionConfig, depth: int | None = None
) -> ScoredList:
    """Apply the configured post-retrieval fusion; depth=None keeps all docs.

    concat is resolved before retrieval, so its single list fuses as sum.
    """
    if config.method == "max":
        return fuse_max(lists, depth=depth)
    if config.method == "rrf":
        return fuse_rrf(lists, rrf_k=config.rrf_k, depth=depth)
    return fuse_sum(lists, depth=depth)
