"""Experiment configuration and the benchmark runner.

A run wires corpus -> unit sets -> per-unit retrieval -> fusion ->
(optional exclusion filter) -> run file -> metrics.  With the cache
reasoner backend every stage is a pure function of the inputs, so two
invocations produce byte-identical run files and reports.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

from .analysis import AnalyzerConfig, load_default_stopwords, read_stopword_file
from .corpus import ingest_corpus
from .dense import (
    DenseParams,
    build_dense_index,
    dense_retrieve_topk,
    load_embeddings,
)
from .errors import InputError
from .evaluation import (
    MetricReport,
    RunFile,
    ndcg_at_k,
    read_qrels,
    recall_at_k,
)
from .fusion import FusionConfig, concat_units, fuse
from .sparse import SparseParams, build_inverted_index, load_index, sparse_retrieve_topk
from .understanding import (
    CacheReasoner,
    ReasonerConfig,
    RetrievalUnit,
    UnitSet,
    build_unit_set,
    make_reasoner,
)

log = logging.getLogger(__name__)

UNDERSTANDING_MODES = ("full", "decomp-only", "none")

# Keys that cmd_sweep may vary; mapped onto ExperimentConfig fields.
SWEEPABLE = {
    "k1": "k1",
    "b": "b",
    "k3": "k3",
    "lambda": "lam",
    "fusion": "fusion",
    "rrf_k": "rrf_k",
    "top_k_per_unit": "top_k_per_unit",
    "final_depth": "final_depth",
    "max_units": "max_units",
    "understanding": "understanding",
}


@dataclass
class ExperimentConfig:
    corpus: str = ""
    queries: str = ""
    qrels: str | None = None
    mode: str = "sparse"
    understanding: str = "full"
    units: str | None = None
    reasoner: dict | None = None
    fusion: str = "sum"
    rrf_k: float = 60.0
    final_depth: int = 100
    top_k_per_unit: int = 1000
    k1: float = 0.9
    b: float = 0.4
    k3: float = 0.4
    lam: float = 0.5
    normalize: bool = True
    doc_embeddings: str | None = None
    query_embeddings: str | None = None
    exclusions: str | None = None
    include_original: bool = False
    max_units: int | None = None
    index_file: str | None = None
    lowercase: bool = True
    fold_ascii: bool = False
    stopwords: str = "default"  # "default", "none", or a file path
    stemmer: str = "porter"
    ndcg_k: int = 10
    recall_k: int = 1
    missing_qrels: str = "skip"
    output_dir: str = "out"
    run_tag: str = "redi"
    jobs: int = 0

    # JSON key "lambda" maps to the lam field (lambda is a keyword).
    _JSON_ALIASES = {"lambda": "lam"}

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot open config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a JSON object")
        return cls().with_overrides(raw, source=str(path))

    def with_overrides(self, overrides: dict, source: str = "flags") -> "ExperimentConfig":
        known = {f.name for f in fields(self)}
        updates = {}
        for key, value in overrides.items():
            name = self._JSON_ALIASES.get(key, key)
            if name.startswith("_") or name not in known:
                raise InputError(f"{source}: unknown config key {key!r}")
            updates[name] = value
        return replace(self, **updates)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            out[key] = getattr(self, f.name)
        return out

    def analyzer(self) -> AnalyzerConfig:
        if self.stopwords == "default":
            stopwords = load_default_stopwords()
        elif self.stopwords == "none":
            stopwords = frozenset()
        else:
            stopwords = read_stopword_file(self.stopwords)
        return AnalyzerConfig(
            lowercase=self.lowercase,
            fold_ascii=self.fold_ascii,
            stopwords=stopwords,
            stemmer=self.stemmer,
        )

    def sparse_params(self) -> SparseParams:
        return SparseParams(k1=self.k1, b=self.b, k3=self.k3)

    def dense_params(self) -> DenseParams:
        return DenseParams(lam=self.lam, normalize=self.normalize)

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            method=self.fusion, rrf_k=self.rrf_k, final_depth=self.final_depth
        )

    def validate(self, need_qrels: bool = False) -> None:
        if self.mode not in ("sparse", "dense"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.understanding not in UNDERSTANDING_MODES:
            raise InputError(f"unknown understanding setting {self.understanding!r}")
        if self.top_k_per_unit < self.final_depth:
            raise InputError(
                f"top_k_per_unit ({self.top_k_per_unit}) must be >= "
                f"final_depth ({self.final_depth})"
            )
        self.fusion_config()
        self.sparse_params()
        self.dense_params()
        required = [("queries", self.queries)]
        if self.mode == "sparse" and not self.index_file:
            required.append(("corpus", self.corpus))
        if self.mode == "dense":
            required.append(("doc_embeddings", self.doc_embeddings))
            required.append(("query_embeddings", self.query_embeddings))
        if need_qrels:
            required.append(("qrels", self.qrels))
        if self.understanding != "none" and not self.units and not self.reasoner:
            raise InputError(
                "understanding is enabled but neither a unit cache nor a "
                "reasoner is configured"
            )
        if self.units:
            required.append(("units", self.units))
        if self.exclusions:
            required.append(("exclusions", self.exclusions))
        if self.index_file:
            required.append(("index_file", self.index_file))
        if self.stopwords not in ("default", "none"):
            required.append(("stopwords", self.stopwords))
        for name, path in required:
            if not path:
                raise InputError(f"config field {name!r} is required")
            if not os.path.exists(path):
                raise InputError(f"{name} path does not exist: {path}")


def read_queries(path) -> list[tuple[str, str]]:
    """Query JSONL: one {"query_id", "text"} object per line."""
    queries: list[tuple[str, str]] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open queries file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            query_id = obj.get("query_id")
            text = obj.get("text")
            if not isinstance(query_id, str) or not isinstance(text, str):
                raise InputError(f"{path}:{lineno}: expected 'query_id' and 'text'")
            if query_id in seen:
                raise InputError(f"{path}:{lineno}: duplicate query_id {query_id!r}")
            seen.add(query_id)
            queries.append((query_id, text))
    if not queries:
        raise InputError(f"{path}: empty queries file")
    return queries


def read_exclusions(path) -> dict[str, set[str]]:
    """Gold-exclusion file: JSON object {query_id: [doc_id, ...]}."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot open exclusions file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{path}: exclusions must map query_id to a doc list")
    return {qid: set(doc_ids) for qid, doc_ids in raw.items()}


def _reasoner_config(config: ExperimentConfig) -> ReasonerConfig:
    with_interp = config.understanding == "full"
    if config.units:
        return ReasonerConfig(
            backend="cache",
            cache_path=config.units,
            max_units=config.max_units,
            with_interpretations=with_interp,
        )
    settings = dict(config.reasoner or {})
    settings.setdefault("backend", "http")
    return ReasonerConfig(
        max_units=config.max_units, with_interpretations=with_interp, **settings
    )


def build_query_units(config: ExperimentConfig,
                      queries: list[tuple[str, str]]) -> list[UnitSet]:
    """One UnitSet per query, honoring the understanding setting."""
    if config.understanding == "none":
        # The "#orig" unit id always denotes the raw query text, matching
        # the id used by include_original, so one query-embedding record
        # serves both paths.
        return [
            UnitSet(
                query_id=qid,
                original_query=text,
                units=[RetrievalUnit(f"q{qid}#orig", text, "")],
                mode=config.mode,
            )
            for qid, text in queries
        ]
    rconfig = _reasoner_config(config)
    reasoner = make_reasoner(rconfig)
    jobs = config.jobs or os.cpu_count() or 1
    if isinstance(reasoner, CacheReasoner) or jobs <= 1:
        unit_sets = [
            build_unit_set(qid, text, config.mode, rconfig, reasoner=reasoner)
            for qid, text in queries
        ]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            unit_sets = list(
                pool.map(
                    lambda q: build_unit_set(
                        q[0], q[1], config.mode, rconfig, reasoner=reasoner
                    ),
                    queries,
                )
            )
    if config.include_original:
        unit_sets = [
            replace(
                us,
                units=us.units
                + [RetrievalUnit(f"q{us.query_id}#orig", us.original_query, "")],
            )
            for us in unit_sets
        ]
    return unit_sets


@dataclass
class BenchmarkResult:
    run: RunFile
    reports: list[MetricReport] = field(default_factory=list)


def _retrieve_query(unit_set: UnitSet, config, sparse_index, dense_index,
                    query_embs) -> list[tuple[str, float]]:
    fusion_config = config.fusion_config()
    units = unit_set.units
    if fusion_config.method == "concat":
        units = [concat_units(unit_set)]
    lists = []
    for unit in units:
        if config.mode == "sparse":
            lists.append(
                sparse_retrieve_topk(
                    unit, sparse_index, config.sparse_params(), config.top_k_per_unit
                )
            )
        else:
            subq_id = f"subq:{unit.unit_id}"
            interp_id = f"interp:{unit.unit_id}" if unit.interpretation else subq_id
            lists.append(
                dense_retrieve_topk(
                    subq_id,
                    interp_id,
                    query_embs,
                    dense_index,
                    config.dense_params(),
                    config.top_k_per_unit,
                )
            )
    return fuse(lists, fusion_config, depth=None)


def run_retrieval(config: ExperimentConfig) -> RunFile:
    """Execute the retrieval pipeline and return the final ranked lists."""
    config.validate()
    queries = read_queries(config.queries)
    unit_sets = build_query_units(config, queries)

    sparse_index = None
    dense_index = None
    query_embs = None
    if config.mode == "sparse":
        if config.index_file:
            sparse_index = load_index(config.index_file)
        else:
            analyzer = config.analyzer()
            store = ingest_corpus(config.corpus, analyzer)
            sparse_index = build_inverted_index(store, analyzer)
    else:
        dense_index = build_dense_index(
            load_embeddings(config.doc_embeddings), normalize=config.normalize
        )
        query_embs = load_embeddings(config.query_embeddings)

    exclusions = read_exclusions(config.exclusions) if config.exclusions else {}

    jobs = config.jobs or os.cpu_count() or 1

    def one(unit_set: UnitSet):
        return _retrieve_query(
            unit_set, config, sparse_index, dense_index, query_embs
        )

    if jobs <= 1:
        fused_lists = [one(us) for us in unit_sets]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fused_lists = list(pool.map(one, unit_sets))

    run = RunFile(entries={}, tag=config.run_tag)
    for unit_set, fused in zip(unit_sets, fused_lists):
        excluded = exclusions.get(unit_set.query_id, set())
        if excluded:
            fused = [(d, s) for d, s in fused if d not in excluded]
        run.entries[unit_set.query_id] = fused[: config.final_depth]
    return run


def evaluate_run(run: RunFile, qrels_path, config: ExperimentConfig) -> list[MetricReport]:
    qrels = read_qrels(qrels_path)
    return [
        ndcg_at_k(run, qrels, config.ndcg_k, missing=config.missing_qrels),
        recall_at_k(run, qrels, config.recall_k, missing=config.missing_qrels),
    ]


def run_benchmark(config: ExperimentConfig) -> BenchmarkResult:
    """Retrieve and, when qrels are configured, evaluate."""
    config.validate(need_qrels=True)
    run = run_retrieval(config)
    reports = evaluate_run(run, config.qrels, config)
    return BenchmarkResult(run=run, reports=reports)


# -- parameter sweeps ----------------------------------------------------------


@dataclass
class SweepRow:
    params: dict
    metrics: dict[str, float]
    status: str
    error: str = ""


def parse_grid_value(text: str):
    """Grid cell values: int/float when numeric, None for "flex", else str."""
    if text == "flex":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def sweep(config: ExperimentConfig, grid: dict[str, list]) -> list[SweepRow]:
    """Run the benchmark over the Cartesian product of grid values.

    A failing cell is marked failed and the sweep continues.
    """
    if not grid:
        raise InputError("empty sweep grid")
    for key in grid:
        if key not in SWEEPABLE:
            raise InputError(
                f"unknown sweep parameter {key!r}; valid: {sorted(SWEEPABLE)}"
            )
    names = list(grid.keys())
    rows: list[SweepRow] = []
    for combo in itertools.product(*(grid[name] for name in names)):
        cell_params = dict(zip(names, combo))
        cell_config = replace(
            config, **{SWEEPABLE[k]: v for k, v in cell_params.items()}
        )
        try:
            result = run_benchmark(cell_config)
            metrics = {
                f"{r.metric}@{r.k}": r.mean for r in result.reports
            }
            rows.append(SweepRow(params=cell_params, metrics=metrics, status="ok"))
        except Exception as exc:  # cell failures must not kill the sweep
            log.warning("sweep cell %r failed: %s", cell_params, exc)
            rows.append(
                SweepRow(params=cell_params, metrics={}, status="failed",
                         error=str(exc))
            )
    return rows


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    import csv

    if not rows:
        raise InputError("no sweep rows to write")
    param_names = list(rows[0].params.keys())
    metric_names: list[str] = []
    for row in rows:
        for name in row.metrics:
            if name not in metric_names:
                metric_names.append(name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(param_names + metric_names + ["status", "error"])
        for row in rows:
            values = [
                "flex" if row.params[n] is None else row.params[n]
                for n in param_names
            ]
            values += [
                f"{row.metrics[m]:.6f}" if m in row.metrics else ""
                for m in metric_names
            ]
            values += [row.status, row.error]
            writer.writerow(values)
