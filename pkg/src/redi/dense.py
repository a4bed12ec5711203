"""Embedding-based retrieval: lambda-fused query vectors, exhaustive scan.

Embeddings arrive via files in one of two formats shared with the
exporter utility:

  binary: magic b"REDIEMB1", uint32 little-endian dim, then per record a
          uint16 id byte length, the UTF-8 id bytes, and dim float32
          little-endian values;
  jsonl:  one {"id": ..., "vector": [...]} object per line.

All stored vectors are L2-normalized at load by default, which makes the
inner product of Eq.-style fused queries against documents coincide with
cosine similarity.  The fused query vector is not re-normalized after
weighting; with unit document vectors this preserves the ranking.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .sparse import ScoredList, top_k_entries

MAGIC = b"REDIEMB1"


@dataclass
class EmbeddingFile:
    dim: int
    records: list[tuple[str, np.ndarray]]

    def __post_init__(self):
        self._by_id = {rec_id: vec for rec_id, vec in self.records}

    def vector(self, rec_id: str) -> np.ndarray:
        try:
            return self._by_id[rec_id]
        except KeyError:
            raise InputError(f"embedding id {rec_id!r} not found") from None

    def __contains__(self, rec_id: str) -> bool:
        return rec_id in self._by_id

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class DenseParams:
    """lambda blends sub-query (lambda) and interpretation (1-lambda)."""

    lam: float = 0.5
    normalize: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InputError("lambda must be in [0, 1]")


@dataclass
class DenseIndex:
    dim: int
    doc_ids: list[str]
    matrix: np.ndarray  # |docs| x dim, float64
    normalized: bool


def load_embeddings(path) -> EmbeddingFile:
    """Load an embedding file, auto-detecting binary vs JSONL."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(MAGIC))
            rest = fh.read()
    except OSError as exc:
        raise InputError(f"cannot open embedding file {path}: {exc}") from exc
    if head == MAGIC:
        return _parse_binary(rest, path)
    return _parse_jsonl(head + rest, path)


def _parse_binary(payload: bytes, path) -> EmbeddingFile:
    if len(payload) < 4:
        raise InputError(f"{path}: truncated embedding file (missing dim)")
    (dim,) = struct.unpack_from("<I", payload, 0)
    if dim < 1:
        raise InputError(f"{path}: invalid dim {dim}")
    offset = 4
    records: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()
    vec_bytes = 4 * dim
    while offset < len(payload):
        if offset + 2 > len(payload):
            raise InputError(f"{path}: truncated embedding file (record header)")
        (id_len,) = struct.unpack_from("<H", payload, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(payload):
            raise InputError(f"{path}: truncated embedding file (record body)")
        rec_id = payload[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset).astype(
            np.float64
        )
        offset += vec_bytes
        if rec_id in seen:
            raise InputError(f"{path}: duplicate embedding id {rec_id!r}")
        seen.add(rec_id)
        records.append((rec_id, vec))
    return EmbeddingFile(dim=dim, records=records)


def _parse_jsonl(payload: bytes, path) -> EmbeddingFile:
    dim = None
    records: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(
            f"{path}: neither a binary embedding file (bad magic) nor JSONL: {exc}"
        ) from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        rec_id = obj.get("id")
        vector = obj.get("vector")
        if not isinstance(rec_id, str) or not isinstance(vector, list):
            raise InputError(f"{path}:{lineno}: expected {{'id', 'vector'}} object")
        if dim is None:
            dim = len(vector)
            if dim < 1:
                raise InputError(f"{path}:{lineno}: empty vector for {rec_id!r}")
        if len(vector) != dim:
            raise InputError(
                f"{path}:{lineno}: dim mismatch for {rec_id!r}: "
                f"got {len(vector)}, expected {dim}"
            )
        if rec_id in seen:
            raise InputError(f"{path}:{lineno}: duplicate embedding id {rec_id!r}")
        seen.add(rec_id)
        records.append((rec_id, np.asarray(vector, dtype=np.float64)))
    if dim is None:
        raise InputError(f"{path}: empty embedding file")
    return EmbeddingFile(dim=dim, records=records)


def write_embeddings(path, records, dim: int, fmt: str = "binary") -> None:
    """Write records [(id, vector)] in a shared embedding format.

    Values are quantized to float32 in both formats.
    """
    if fmt not in ("binary", "jsonl"):
        raise InputError(f"unknown embedding format {fmt!r}")
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", dim))
            for rec_id, vec in records:
                vec32 = np.asarray(vec, dtype="<f4")
                if vec32.shape != (dim,):
                    raise InputError(f"record {rec_id!r} has wrong dim")
                id_bytes = rec_id.encode("utf-8")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(vec32.tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for rec_id, vec in records:
                vec32 = np.asarray(vec, dtype=np.float32)
                if vec32.shape != (dim,):
                    raise InputError(f"record {rec_id!r} has wrong dim")
                fh.write(
                    json.dumps(
                        {"id": rec_id, "vector": [float(x) for x in vec32]},
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InputError("cannot L2-normalize a zero vector")
    return matrix / norms


def build_dense_index(embeddings: EmbeddingFile, normalize: bool = True) -> DenseIndex:
    """Stack document embeddings into a matrix for exhaustive scoring.

    A uniform "doc:" id prefix (as written by the exporter) is stripped so
    ranked lists carry bare doc_ids.
    """
    ids = [rec_id for rec_id, _ in embeddings.records]
    if ids and all(rec_id.startswith("doc:") for rec_id in ids):
        ids = [rec_id[len("doc:") :] for rec_id in ids]
    matrix = np.stack([vec for _, vec in embeddings.records]).astype(np.float64)
    if normalize:
        matrix = normalize_rows(matrix)
    return DenseIndex(
        dim=embeddings.dim, doc_ids=ids, matrix=matrix, normalized=normalize
    )


def fuse_query_embedding(
    subq_vec: np.ndarray, interp_vec: np.ndarray, lam: float
) -> np.ndarray:
    """lam * subq + (1 - lam) * interp, componentwise."""
    subq_vec = np.asarray(subq_vec, dtype=np.float64)
    interp_vec = np.asarray(interp_vec, dtype=np.float64)
    if subq_vec.shape != interp_vec.shape:
        raise InputError(
            f"dim mismatch: {subq_vec.shape} vs {interp_vec.shape}"
        )
    return lam * subq_vec + (1.0 - lam) * interp_vec


def dense_score(fused: np.ndarray, doc_vec: np.ndarray) -> float:
    fused = np.asarray(fused, dtype=np.float64)
    doc_vec = np.asarray(doc_vec, dtype=np.float64)
    if fused.shape != doc_vec.shape:
        raise InputError(f"dim mismatch: {fused.shape} vs {doc_vec.shape}")
    return float(np.dot(fused, doc_vec))


def _query_vector(query_embs: EmbeddingFile, rec_id: str, normalize: bool) -> np.ndarray:
    vec = query_embs.vector(rec_id)
    if normalize:
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise InputError(f"embedding {rec_id!r} has zero norm")
        vec = vec / norm
    return vec


def dense_retrieve_topk(
    subq_id: str,
    interp_id: str,
    query_embs: EmbeddingFile,
    index: DenseIndex,
    params: DenseParams,
    k: int,
) -> ScoredList:
    """Exhaustively score all documents against the fused query vector.

    Passing interp_id equal to subq_id degenerates to scoring by the
    sub-query embedding alone (used when a unit has no interpretation).
    """
    if k < 1:
        raise InputError("k must be >= 1")
    subq_vec = _query_vector(query_embs, subq_id, params.normalize)
    if interp_id == subq_id:
        interp_vec = subq_vec
    else:
        interp_vec = _query_vector(query_embs, interp_id, params.normalize)
    if subq_vec.shape[0] != index.dim:
        raise InputError(
            f"query dim {subq_vec.shape[0]} does not match index dim {index.dim}"
        )
    fused = fuse_query_embedding(subq_vec, interp_vec, params.lam)
    scores = index.matrix @ fused
    pairs = {doc_id: float(s) for doc_id, s in zip(index.doc_ids, scores)}
    return top_k_entries(pairs, k)
