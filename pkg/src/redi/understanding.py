"""Query understanding: decomposition and per-sub-query interpretation.

Units come from a pluggable reasoner backend: a live HTTP chat-completion
endpoint, or a deterministic JSONL cache file keyed by (query_id, mode).
With the cache backend the whole pipeline is a pure function of its
inputs, which is what makes run files reproducible.

Cache JSONL schema, one UnitSet per line:
  {"query_id": ..., "mode": "sparse"|"dense", "original_query": ...,
   "units": [{"sub_query": ..., "interpretation": ...}, ...]}
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from importlib import resources

import requests

from .errors import InputError, ReasonerError

log = logging.getLogger(__name__)

MODES = ("sparse", "dense")

# Above this many units per query we warn; flexible decomposition is
# otherwise uncapped.
FLEXIBLE_UNIT_WARN_THRESHOLD = 15

DEFAULT_RESPONSE_PATH = "choices.0.message.content"
DEFAULT_AUTH_ENV = "REDI_API_TOKEN"


@dataclass(frozen=True)
class RetrievalUnit:
    unit_id: str
    sub_query: str
    interpretation: str = ""


@dataclass
class UnitSet:
    query_id: str
    original_query: str
    units: list[RetrievalUnit]
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if not self.units:
            raise InputError(f"query {self.query_id!r}: unit set must be non-empty")
        ids = [u.unit_id for u in self.units]
        if len(set(ids)) != len(ids):
            raise InputError(f"query {self.query_id!r}: duplicate unit_id")


@dataclass(frozen=True)
class ReasonerConfig:
    backend: str = "cache"  # "cache" or "http"
    cache_path: str | None = None
    endpoint: str | None = None
    model_name: str = ""
    temperature: float = 0.6
    max_units: int | None = None
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5
    with_interpretations: bool = True
    auth_env: str = DEFAULT_AUTH_ENV
    response_path: str = DEFAULT_RESPONSE_PATH
    prompt_dir: str | None = None

    def __post_init__(self):
        if self.backend == "cache":
            if not self.cache_path:
                raise InputError("cache backend requires a cache path")
        elif self.backend == "http":
            if not self.endpoint or not self.model_name:
                raise InputError("http backend requires endpoint and model_name")
        else:
            raise InputError(f"unknown reasoner backend {self.backend!r}")


def unit_id_for(query_id: str, index: int) -> str:
    return f"q{query_id}#u{index}"


# -- cache file I/O ----------------------------------------------------------


def load_unit_cache(path) -> dict[tuple[str, str], UnitSet]:
    """Load a cache file into {(query_id, mode): UnitSet}, validating schema."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open unit cache {path}: {exc}") from exc
    cache: dict[tuple[str, str], UnitSet] = {}
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                unit_set = _unit_set_from_dict(obj)
            except (KeyError, TypeError, InputError) as exc:
                raise InputError(f"{path}:{lineno}: bad unit set: {exc}") from exc
            key = (unit_set.query_id, unit_set.mode)
            if key in cache:
                raise InputError(
                    f"{path}:{lineno}: duplicate (query_id, mode) {key!r}"
                )
            cache[key] = unit_set
    return cache


def save_unit_cache(path, unit_sets) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for us in unit_sets:
            fh.write(json.dumps(_unit_set_to_dict(us), ensure_ascii=False) + "\n")


def _unit_set_from_dict(obj: dict) -> UnitSet:
    query_id = obj["query_id"]
    mode = obj["mode"]
    original = obj["original_query"]
    if not isinstance(query_id, str) or not isinstance(original, str):
        raise InputError("query_id and original_query must be strings")
    units = []
    for i, u in enumerate(obj["units"]):
        sub_query = u["sub_query"]
        interpretation = u.get("interpretation", "")
        if not isinstance(sub_query, str) or not sub_query.strip():
            raise InputError(f"unit {i}: sub_query must be a non-empty string")
        if not isinstance(interpretation, str):
            raise InputError(f"unit {i}: interpretation must be a string")
        units.append(
            RetrievalUnit(
                unit_id=unit_id_for(query_id, i),
                sub_query=sub_query,
                interpretation=interpretation,
            )
        )
    return UnitSet(query_id=query_id, original_query=original, units=units, mode=mode)


def _unit_set_to_dict(us: UnitSet) -> dict:
    return {
        "query_id": us.query_id,
        "mode": us.mode,
        "original_query": us.original_query,
        "units": [
            {"sub_query": u.sub_query, "interpretation": u.interpretation}
            for u in us.units
        ],
    }


# -- raw response parsing ------------------------------------------------------

_THINK_DELIMITER = "</think>"


def parse_reasoner_output(raw: str) -> list[tuple[str, str]]:
    """Extract (sub_query, interpretation) pairs from a raw LLM response.

    Tolerates a chain-of-thought block before "</think>", surrounding
    prose, and markdown code fences; the first parseable JSON array of
    objects with a non-empty "sub_query" wins.
    """
    if _THINK_DELIMITER in raw:
        raw = raw.rsplit(_THINK_DELIMITER, 1)[1]
    decoder = json.JSONDecoder()
    start = raw.find("[")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            value = None
        if isinstance(value, list) and value:
            pairs = _pairs_from_array(value)
            if pairs is not None:
                return pairs
        start = raw.find("[", start + 1)
    raise ReasonerError("no JSON array of sub-query objects found in response")


def _pairs_from_array(value: list) -> list[tuple[str, str]] | None:
    pairs = []
    for item in value:
        if not isinstance(item, dict):
            return None
        sub_query = item.get("sub_query")
        if not isinstance(sub_query, str) or not sub_query.strip():
            return None
        interpretation = item.get("interpretation", "")
        if not isinstance(interpretation, str):
            return None
        pairs.append((" ".join(sub_query.split()), interpretation.strip()))
    return pairs or None


# -- backends ------------------------------------------------------------------


class CacheReasoner:
    """Deterministic reasoner backed by a unit-cache file."""

    def __init__(self, config: ReasonerConfig):
        self.config = config
        self.cache = load_unit_cache(config.cache_path)

    def lookup(self, query_id: str, mode: str) -> UnitSet:
        key = (query_id, mode)
        if key not in self.cache:
            raise ReasonerError(
                f"no cached unit set for query_id {query_id!r} in mode {mode!r}"
            )
        return self.cache[key]

    def decompose(self, query: str) -> list[str]:
        for us in self.cache.values():
            if us.original_query == query:
                return [u.sub_query for u in us.units]
        raise ReasonerError(f"no cached decomposition for query {query!r}")

    def interpret(self, sub_query: str, mode: str, original_query: str = "") -> str:
        for (qid, m), us in self.cache.items():
            if m != mode:
                continue
            for u in us.units:
                if u.sub_query == sub_query:
                    return u.interpretation
        raise ReasonerError(
            f"no cached {mode} interpretation for sub-query {sub_query!r}"
        )


class HttpReasoner:
    """Minimal chat-completion client: POST {model, messages, temperature}."""

    def __init__(self, config: ReasonerConfig, session=None):
        self.config = config
        self.session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.config.retries):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    self.config.endpoint,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
                resp.raise_for_status()
                return _extract_path(resp.json(), self.config.response_path)
            except (requests.RequestException, ReasonerError, ValueError) as exc:
                last_error = exc
                log.warning("reasoner attempt %d failed: %s", attempt + 1, exc)
        raise ReasonerError(
            f"reasoner failed after {self.config.retries} attempts: {last_error}"
        )

    def decompose(self, query: str) -> list[str]:
        prompt = _render_prompt(
            "decompose.txt",
            self.config.prompt_dir,
            query=query,
            max_units_clause=(
                f", at most {self.config.max_units}"
                if self.config.max_units
                else ""
            ),
        )
        pairs = parse_reasoner_output(self._complete(prompt))
        return [sub_query for sub_query, _ in pairs]

    def interpret(self, sub_query: str, mode: str, original_query: str = "") -> str:
        if mode not in MODES:
            raise InputError(f"unknown mode {mode!r}")
        prompt = _render_prompt(
            f"interpret_{mode}.txt",
            self.config.prompt_dir,
            query=original_query or sub_query,
            sub_query=sub_query,
        )
        text = _strip_code_fence(self._complete(prompt).strip())
        if not text:
            raise ReasonerError(f"empty interpretation for sub-query {sub_query!r}")
        return text


def _strip_code_fence(text: str) -> str:
    """Unwrap a whole-response markdown fence, dropping any language tag."""
    if not text.startswith("```"):
        return text
    lines = text.splitlines()
    if lines and lines[0].startswith("```"):
        lines = lines[1:]
    if lines and lines[-1].strip() == "```":
        lines = lines[:-1]
    return "\n".join(lines).strip()


def _extract_path(obj, dotted: str) -> str:
    node = obj
    for part in dotted.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict):
            if part not in node:
                raise ReasonerError(f"response missing field {dotted!r}")
            node = node[part]
        else:
            raise ReasonerError(f"response missing field {dotted!r}")
    if not isinstance(node, str):
        raise ReasonerError(f"response field {dotted!r} is not text")
    return node


def _render_prompt(name: str, prompt_dir: str | None, **fields) -> str:
    if prompt_dir:
        with open(os.path.join(prompt_dir, name), encoding="utf-8") as fh:
            template = fh.read()
    else:
        template = (
            resources.files("redi.data.prompts").joinpath(name).read_text("utf-8")
        )
    return template.format(**fields)


def make_reasoner(config: ReasonerConfig):
    if config.backend == "cache":
        return CacheReasoner(config)
    return HttpReasoner(config)


# -- spec operations -----------------------------------------------------------


def decompose(query: str, config: ReasonerConfig, reasoner=None) -> list[str]:
    """Split a query into sub-queries; truncates to max_units when set."""
    if not query.strip():
        raise InputError("query must be non-empty")
    reasoner = reasoner or make_reasoner(config)
    subs = reasoner.decompose(query)
    if not subs:
        raise ReasonerError(f"decomposition produced no sub-queries for {query!r}")
    if config.max_units is not None:
        subs = subs[: config.max_units]
    elif len(subs) > FLEXIBLE_UNIT_WARN_THRESHOLD:
        log.warning(
            "query decomposed into %d units (> %d)",
            len(subs),
            FLEXIBLE_UNIT_WARN_THRESHOLD,
        )
    return subs


def interpret(
    sub_query: str, mode: str, config: ReasonerConfig, reasoner=None,
    original_query: str = "",
) -> str:
    if not sub_query.strip():
        raise InputError("sub_query must be non-empty")
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}")
    reasoner = reasoner or make_reasoner(config)
    return reasoner.interpret(sub_query, mode, original_query)


def build_unit_set(
    query_id: str, query: str, mode: str, config: ReasonerConfig, reasoner=None
) -> UnitSet:
    """Decompose, then interpret each sub-query (unless disabled)."""
    reasoner = reasoner or make_reasoner(config)
    if isinstance(reasoner, CacheReasoner):
        cached = reasoner.lookup(query_id, mode)
        units = cached.units
        if config.max_units is not None:
            units = units[: config.max_units]
        if not config.with_interpretations:
            units = [replace(u, interpretation="") for u in units]
        return UnitSet(
            query_id=query_id,
            original_query=cached.original_query,
            units=list(units),
            mode=mode,
        )
    subs = decompose(query, config, reasoner=reasoner)
    units = []
    for i, sub_query in enumerate(subs):
        interpretation = ""
        if config.with_interpretations:
            interpretation = interpret(
                sub_query, mode, config, reasoner=reasoner, original_query=query
            )
        units.append(
            RetrievalUnit(
                unit_id=unit_id_for(query_id, i),
                sub_query=sub_query,
                interpretation=interpretation,
            )
        )
    return UnitSet(query_id=query_id, original_query=query, units=units, mode=mode)
