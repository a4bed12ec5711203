"""Command-line interface.

Subcommands: ingest, understand, retrieve, eval, sweep.  Exit codes:
0 success, 1 internal error, 2 usage/input error.  stdout carries data
and tables; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import runner as runner_mod
from .corpus import corpus_stats, ingest_corpus
from .errors import InputError, RediError
from .evaluation import (
    format_report_table,
    ndcg_at_k,
    read_qrels,
    read_run,
    recall_at_k,
    write_report_json,
    write_run,
)
from .runner import ExperimentConfig, parse_grid_value, run_retrieval, sweep, write_sweep_csv
from .sparse import build_inverted_index, save_index
from .understanding import (
    ReasonerConfig,
    build_unit_set,
    load_unit_cache,
    make_reasoner,
    save_unit_cache,
)

log = logging.getLogger(__name__)


def _add_analyzer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-lowercase", dest="lowercase", action="store_false",
                        help="keep original case")
    parser.add_argument("--fold-ascii", action="store_true",
                        help="strip diacritics to ASCII")
    parser.add_argument("--stopwords", default="default",
                        help="'default', 'none', or a stopword file path")
    parser.add_argument("--stemmer", choices=("porter", "none"), default="porter")


def _analyzer_overrides(args) -> dict:
    return {
        "lowercase": args.lowercase,
        "fold_ascii": args.fold_ascii,
        "stopwords": args.stopwords,
        "stemmer": args.stemmer,
    }


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config JSON file")
    parser.add_argument("--corpus")
    parser.add_argument("--queries")
    parser.add_argument("--qrels")
    parser.add_argument("--mode", choices=("sparse", "dense"))
    parser.add_argument("--understanding", choices=runner_mod.UNDERSTANDING_MODES)
    parser.add_argument("--units", help="unit cache JSONL path")
    parser.add_argument("--fusion", choices=("sum", "max", "rrf", "concat"))
    parser.add_argument("--rrf-k", type=float, dest="rrf_k")
    parser.add_argument("--final-depth", type=int, dest="final_depth")
    parser.add_argument("--top-k-per-unit", type=int, dest="top_k_per_unit")
    parser.add_argument("--k1", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--k3", type=float)
    parser.add_argument("--lambda", type=float, dest="lam")
    parser.add_argument("--no-normalize", dest="normalize", action="store_false",
                        default=None, help="keep raw (unnormalized) embeddings")
    parser.add_argument("--doc-embeddings", dest="doc_embeddings")
    parser.add_argument("--query-embeddings", dest="query_embeddings")
    parser.add_argument("--exclusions", help="gold-exclusion JSON path")
    parser.add_argument("--include-original", dest="include_original",
                        action="store_true", default=None,
                        help="score the original query as an extra unit")
    parser.add_argument("--max-units", type=int, dest="max_units")
    parser.add_argument("--index-file", dest="index_file")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--run-tag", dest="run_tag")
    parser.add_argument("--jobs", type=int, help="worker threads (default: cores)")


def _config_from_args(args) -> ExperimentConfig:
    config = (
        ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    )
    overrides = {}
    for key in (
        "corpus", "queries", "qrels", "mode", "understanding", "units", "fusion",
        "rrf_k", "final_depth", "top_k_per_unit", "k1", "b", "k3", "lam",
        "normalize", "doc_embeddings", "query_embeddings", "exclusions",
        "include_original", "max_units", "index_file", "output_dir", "run_tag",
        "jobs",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return config.with_overrides(overrides)


def _write_config_snapshot(config: ExperimentConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "config.resolved.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_ingest(args) -> int:
    analyzer_dict = _analyzer_overrides(args)
    config = ExperimentConfig().with_overrides(analyzer_dict)
    analyzer = config.analyzer()
    store = ingest_corpus(args.corpus, analyzer)
    index = build_inverted_index(store, analyzer)
    save_index(index, args.out)
    n, avgdl = corpus_stats(store)
    print(f"docs {n}")
    print(f"avgdl {avgdl:.6f}")
    print(f"vocab {len(index.postings)}")
    print(f"index {args.out}")
    return 0


def cmd_understand(args) -> int:
    queries = runner_mod.read_queries(args.queries)
    existing = {}
    if os.path.exists(args.out):
        existing = load_unit_cache(args.out)
    reasoner_config = ReasonerConfig(
        backend="http",
        endpoint=args.endpoint,
        model_name=args.model,
        temperature=args.temperature,
        max_units=args.max_units,
        timeout=args.timeout,
        retries=args.retries,
        auth_env=args.auth_env,
        response_path=args.response_path,
    )
    reasoner = make_reasoner(reasoner_config)
    fetched = 0
    failures = []
    for query_id, text in queries:
        if (query_id, args.mode) in existing:
            continue
        try:
            unit_set = build_unit_set(
                query_id, text, args.mode, reasoner_config, reasoner=reasoner
            )
        except RediError as exc:
            if args.skip_failed:
                log.warning("skipping query %s: %s", query_id, exc)
                failures.append(query_id)
                continue
            raise
        existing[(query_id, args.mode)] = unit_set
        fetched += 1
    save_unit_cache(args.out, existing.values())
    print(f"cached {len(existing)} unit sets ({fetched} new) -> {args.out}")
    if failures:
        print(f"skipped {len(failures)} failed queries", file=sys.stderr)
    return 0


def cmd_retrieve(args) -> int:
    config = _config_from_args(args)
    config.validate()
    run = run_retrieval(config)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_config_snapshot(config, out_dir)
    run_path = args.out or os.path.join(out_dir, "run.txt")
    write_run(run_path, run)
    print(run_path)
    return 0


def cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    reports = [
        ndcg_at_k(run, qrels, args.ndcg_k, missing=args.missing),
        recall_at_k(run, qrels, args.recall_k, missing=args.missing),
    ]
    groups = None
    if args.groups:
        try:
            with open(args.groups, encoding="utf-8") as fh:
                groups = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read groups manifest {args.groups}: {exc}")
        if not isinstance(groups, dict) or not all(
            isinstance(v, str) for v in groups.values()
        ):
            raise InputError(f"{args.groups}: expected a JSON object of strings")
    print(format_report_table(reports, groups=groups))
    if args.report:
        write_report_json(args.report, reports)
        if not args.no_figure:
            from .figures import save_report_figure

            save_report_figure(reports, os.path.splitext(args.report)[0] + ".png")
    return 0


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    grid: dict[str, list] = {}
    for spec in args.grid:
        if "=" not in spec:
            raise InputError(f"bad --grid value {spec!r}; expected name=v1,v2,...")
        name, _, values = spec.partition("=")
        grid[name.strip()] = [parse_grid_value(v.strip()) for v in values.split(",")]
    rows = sweep(config, grid)
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    _write_config_snapshot(config, out_dir)
    csv_path = args.out or os.path.join(out_dir, "sweep.csv")
    write_sweep_csv(csv_path, rows)
    print(csv_path)
    if not args.no_figure and len(grid) == 1:
        from .figures import save_sweep_figure

        save_sweep_figure(
            rows, next(iter(grid)), os.path.splitext(csv_path)[0] + ".png"
        )
    failed = sum(1 for r in rows if r.status == "failed")
    if failed:
        print(f"{failed}/{len(rows)} sweep cells failed", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redi",
        description="Decompose-and-interpret retrieval engine and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="build and serialize a sparse index")
    p_ingest.add_argument("--corpus", required=True)
    p_ingest.add_argument("--out", required=True, help="index output path")
    _add_analyzer_flags(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_und = sub.add_parser("understand", help="build or extend a unit cache")
    p_und.add_argument("--queries", required=True)
    p_und.add_argument("--mode", choices=("sparse", "dense"), required=True)
    p_und.add_argument("--out", required=True, help="unit cache JSONL path")
    p_und.add_argument("--endpoint", required=True, help="chat-completion URL")
    p_und.add_argument("--model", required=True)
    p_und.add_argument("--temperature", type=float, default=0.6)
    p_und.add_argument("--max-units", type=int, dest="max_units")
    p_und.add_argument("--timeout", type=float, default=60.0)
    p_und.add_argument("--retries", type=int, default=3)
    p_und.add_argument("--auth-env", dest="auth_env", default="REDI_API_TOKEN",
                       help="env var holding the bearer token")
    p_und.add_argument("--response-path", dest="response_path",
                       default="choices.0.message.content",
                       help="dotted path to the text field in responses")
    p_und.add_argument("--skip-failed", action="store_true",
                       help="skip queries whose reasoner calls fail")
    p_und.set_defaults(func=cmd_understand)

    p_ret = sub.add_parser("retrieve", help="run retrieval, write a TREC run file")
    _add_config_flags(p_ret)
    p_ret.add_argument("--out", help="run file path (default: <output-dir>/run.txt)")
    p_ret.set_defaults(func=cmd_retrieve)

    p_eval = sub.add_parser("eval", help="evaluate a run file against qrels")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--qrels", required=True)
    p_eval.add_argument("--ndcg-k", type=int, default=10, dest="ndcg_k")
    p_eval.add_argument("--recall-k", type=int, default=1, dest="recall_k")
    p_eval.add_argument("--missing", choices=("skip", "error"), default="skip",
                        help="policy for run queries absent from qrels")
    p_eval.add_argument("--groups", help="JSON {query_id: group} manifest")
    p_eval.add_argument("--report", help="write machine-readable report JSON here")
    p_eval.add_argument("--no-figure", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid-sweep parameters, write CSV")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--grid", action="append", required=True,
                         metavar="NAME=V1,V2,...",
                         help="swept parameter (repeatable)")
    p_sweep.add_argument("--out", help="CSV path (default: <output-dir>/sweep.csv)")
    p_sweep.add_argument("--no-figure", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RediError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
