"""Dense retrieval tests: file formats, fusion weighting, exhaustive top-k."""

import json

import numpy as np
import pytest

from oracle import brute_force_dense, rank_by_score
from redi.dense import (
    DenseParams,
    build_dense_index,
    dense_retrieve_topk,
    dense_score,
    fuse_query_embedding,
    load_embeddings,
    write_embeddings,
)
from redi.errors import InputError


def write_jsonl_embeddings(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec_id, vec in records:
            fh.write(json.dumps({"id": rec_id, "vector": list(vec)}) + "\n")


class TestEmbeddingFiles:
    def test_jsonl_single_record(self, tmp_path):
        path = tmp_path / "e.jsonl"
        write_jsonl_embeddings(path, [("d1", [1.0, 0.0])])
        emb = load_embeddings(path)
        assert emb.dim == 2
        assert len(emb) == 1
        assert np.allclose(emb.vector("d1"), [1.0, 0.0])

    def test_jsonl_dim_mismatch_names_record(self, tmp_path):
        path = tmp_path / "e.jsonl"
        write_jsonl_embeddings(path, [("d0", [1.0, 0.0]), ("d1", [1.0, 0.0, 0.5])])
        with pytest.raises(InputError, match="d1"):
            load_embeddings(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "e.jsonl"
        write_jsonl_embeddings(path, [("d1", [1.0]), ("d1", [2.0])])
        with pytest.raises(InputError, match="duplicate"):
            load_embeddings(path)

    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        records = [(f"rec{i}", rng.normal(size=16)) for i in range(10)]
        path = tmp_path / "e.bin"
        write_embeddings(path, records, dim=16, fmt="binary")
        emb = load_embeddings(path)
        assert emb.dim == 16
        assert [r for r, _ in emb.records] == [r for r, _ in records]
        for (_, original), (_, loaded) in zip(records, emb.records):
            assert np.allclose(loaded, original, atol=1e-6)

    def test_jsonl_writer_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        records = [(f"rec{i}", rng.normal(size=4)) for i in range(3)]
        path = tmp_path / "e.jsonl"
        write_embeddings(path, records, dim=4, fmt="jsonl")
        emb = load_embeddings(path)
        for (_, original), (_, loaded) in zip(records, emb.records):
            assert np.allclose(loaded, original, atol=1e-6)

    def test_truncated_binary(self, tmp_path):
        path = tmp_path / "e.bin"
        write_embeddings(path, [("d1", np.ones(4))], dim=4, fmt="binary")
        payload = path.read_bytes()
        path.write_bytes(payload[:-3])
        with pytest.raises(InputError, match="truncated"):
            load_embeddings(path)

    def test_unicode_ids(self, tmp_path):
        path = tmp_path / "e.bin"
        write_embeddings(path, [("dé1", np.ones(2))], dim=2, fmt="binary")
        emb = load_embeddings(path)
        assert emb.records[0][0] == "dé1"

    def test_missing_id_lookup(self, tmp_path):
        path = tmp_path / "e.jsonl"
        write_jsonl_embeddings(path, [("d1", [1.0])])
        with pytest.raises(InputError, match="nope"):
            load_embeddings(path).vector("nope")


class TestFuse:
    def test_lambda_one_keeps_subq(self):
        subq = np.array([0.3, -0.2, 0.9])
        interp = np.array([1.0, 1.0, 1.0])
        assert np.array_equal(fuse_query_embedding(subq, interp, 1.0), subq)

    def test_midpoint(self):
        fused = fuse_query_embedding(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.5)
        assert np.allclose(fused, [0.5, 0.5])

    def test_fixed_point(self):
        v = np.array([0.2, 0.4, -0.4])
        for lam in (0.0, 0.25, 0.5, 0.9, 1.0):
            assert np.allclose(fuse_query_embedding(v, v, lam), v)

    def test_dim_mismatch(self):
        with pytest.raises(InputError, match="dim"):
            fuse_query_embedding(np.ones(2), np.ones(3), 0.5)


class TestDenseScore:
    def test_half(self):
        assert dense_score(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == 0.5

    def test_orthogonal(self):
        assert dense_score(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            naive = 0.0
            for x, y in zip(a, b):
                naive += float(x) * float(y)
            assert dense_score(a, b) == pytest.approx(naive, abs=1e-12)


def make_index(rng, n_docs=20, dim=16, normalize=True, prefix=""):
    records = [(f"{prefix}d{i:02d}", rng.normal(size=dim)) for i in range(n_docs)]
    raw = {rec_id.removeprefix("doc:"): vec for rec_id, vec in records}
    from redi.dense import EmbeddingFile

    emb = EmbeddingFile(dim=dim, records=records)
    return build_dense_index(emb, normalize=normalize), raw


class TestDenseIndex:
    def test_normalized_rows_unit(self):
        rng = np.random.default_rng(3)
        index, _ = make_index(rng)
        norms = np.linalg.norm(index.matrix, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)

    def test_doc_prefix_stripped(self):
        rng = np.random.default_rng(4)
        index, _ = make_index(rng, prefix="doc:")
        assert index.doc_ids[0] == "d00"

    def test_zero_vector_rejected(self):
        from redi.dense import EmbeddingFile

        emb = EmbeddingFile(dim=2, records=[("d0", np.zeros(2))])
        with pytest.raises(InputError, match="zero"):
            build_dense_index(emb, normalize=True)


class TestRetrieve:
    def make_queries(self, rng, dim=16):
        from redi.dense import EmbeddingFile

        records = [
            ("subq:u0", rng.normal(size=dim)),
            ("interp:u0", rng.normal(size=dim)),
        ]
        return EmbeddingFile(dim=dim, records=records)

    def test_k_at_least_docs_full_ranking(self):
        rng = np.random.default_rng(5)
        index, _ = make_index(rng, n_docs=8)
        queries = self.make_queries(rng)
        out = dense_retrieve_topk(
            "subq:u0", "interp:u0", queries, index, DenseParams(), k=100
        )
        assert len(out) == 8
        assert sorted(d for d, _ in out) == sorted(index.doc_ids)

    def test_self_similarity_rank1(self):
        """A doc equal to the fused query vector ranks first with score ~1."""
        rng = np.random.default_rng(6)
        dim = 16
        subq = rng.normal(size=dim)
        interp = rng.normal(size=dim)
        params = DenseParams(lam=0.5, normalize=True)
        fused = fuse_query_embedding(
            subq / np.linalg.norm(subq), interp / np.linalg.norm(interp), params.lam
        )
        from redi.dense import EmbeddingFile

        docs = [("target", fused)] + [
            (f"d{i:02d}", rng.normal(size=dim)) for i in range(10)
        ]
        index = build_dense_index(EmbeddingFile(dim=dim, records=docs), normalize=True)
        queries = EmbeddingFile(
            dim=dim, records=[("subq:u0", subq), ("interp:u0", interp)]
        )
        out = dense_retrieve_topk("subq:u0", "interp:u0", queries, index, params, k=3)
        top_doc, top_score = out[0]
        assert top_doc == "target"
        assert top_score == pytest.approx(np.linalg.norm(fused), abs=1e-6)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        index, _ = make_index(rng, n_docs=20)
        queries = self.make_queries(rng)
        params = DenseParams(lam=0.3, normalize=True)
        got = dense_retrieve_topk("subq:u0", "interp:u0", queries, index, params, k=20)

        subq = queries.vector("subq:u0")
        interp = queries.vector("interp:u0")
        subq = subq / np.linalg.norm(subq)
        interp = interp / np.linalg.norm(interp)
        fused = params.lam * subq + (1 - params.lam) * interp
        doc_vecs = dict(zip(index.doc_ids, index.matrix))
        expected = rank_by_score(brute_force_dense(doc_vecs, fused))
        assert [d for d, _ in got] == [d for d, _ in expected]
        for (_, s1), (_, s2) in zip(got, expected):
            assert s1 == pytest.approx(s2, abs=1e-12)

    def test_missing_id(self):
        rng = np.random.default_rng(8)
        index, _ = make_index(rng)
        queries = self.make_queries(rng)
        with pytest.raises(InputError, match="absent"):
            dense_retrieve_topk("absent", "interp:u0", queries, index,
                                DenseParams(), k=5)

    def test_lambda_endpoints_reduce_to_single_embedding(self):
        rng = np.random.default_rng(9)
        index, _ = make_index(rng)
        queries = self.make_queries(rng)
        for lam, alone_id in ((1.0, "subq:u0"), (0.0, "interp:u0")):
            fused_run = dense_retrieve_topk(
                "subq:u0", "interp:u0", queries, index,
                DenseParams(lam=lam), k=20,
            )
            alone_run = dense_retrieve_topk(
                alone_id, alone_id, queries, index, DenseParams(lam=0.5), k=20
            )
            assert [d for d, _ in fused_run] == [d for d, _ in alone_run]

    def test_normalized_inner_product_equals_cosine(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            cos = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            an = a / np.linalg.norm(a)
            bn = b / np.linalg.norm(b)
            assert dense_score(an, bn) == pytest.approx(cos, abs=1e-6)

    def test_repeated_calls_identical(self):
        rng = np.random.default_rng(12)
        index, _ = make_index(rng)
        queries = self.make_queries(rng)
        params = DenseParams()
        first = dense_retrieve_topk("subq:u0", "interp:u0", queries, index, params, 10)
        second = dense_retrieve_topk("subq:u0", "interp:u0", queries, index, params, 10)
        assert first == second

    def test_interp_id_equal_to_subq_short_circuits(self):
        rng = np.random.default_rng(13)
        index, _ = make_index(rng)
        queries = self.make_queries(rng)
        by_pair = dense_retrieve_topk(
            "subq:u0", "subq:u0", queries, index, DenseParams(lam=0.5), k=20
        )
        alone = dense_retrieve_topk(
            "subq:u0", "subq:u0", queries, index, DenseParams(lam=1.0), k=20
        )
        assert by_pair == alone


class TestParams:
    def test_default_lambda(self):
        assert DenseParams().lam == 0.5

    def test_bad_lambda(self):
        with pytest.raises(InputError):
            DenseParams(lam=1.5)
