"""Embedding training, serialization, and neighbor queries."""
import numpy as np
import pytest

from semshift.corpus import Vocabulary
from semshift.embed import (
    CbowParams,
    EmbeddingSpace,
    cosine_distance,
    encode_streams,
    load_binary,
    load_text,
    nearest_neighbors,
    neighborhood,
    save_binary,
    save_text,
    train_embeddings,
)


def _toy_vocab(n=6):
    return Vocabulary([f"t{i}" for i in range(n)], [10 * (n - i) for i in range(n)])


def _space(vectors, freqs=None):
    vectors = np.asarray(vectors, dtype=np.float32)
    terms = [chr(ord("a") + i) for i in range(vectors.shape[0])]
    freqs = freqs or [100] * len(terms)
    return EmbeddingSpace(Vocabulary(terms, freqs), vectors)


def test_cosine_distance_basics():
    assert cosine_distance([1.0, 0.0], [1.0, 0.0]) == pytest.approx(0.0)
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        cosine_distance([0.0, 0.0], [1.0, 0.0])


def test_encode_streams_drops_oov_and_empty_docs():
    vocab = Vocabulary(["a", "b"], [2, 1])
    tokens, offsets = encode_streams([["a", "x", "b"], ["x"], ["b"]], vocab)
    assert tokens.tolist() == [0, 1, 1]
    assert offsets.tolist() == [0, 2, 3]


def test_hand_built_neighborhood():
    # w=(1,0); a=(0.9,0.1), b=(0,1), c=(-1,0): nearest two are a then b
    space = _space([[1, 0], [0.9, 0.1], [0, 1], [-1, 0]])
    neigh, flag = neighborhood(space, "a", k=2, cf_nb=1, min_freq=1)
    assert neigh == ["b", "c"]
    assert flag is False


def test_neighborhood_small_pool_flag_and_errors():
    space = _space([[1, 0], [0.9, 0.1], [0, 1]], freqs=[100, 100, 10])
    neigh, flag = neighborhood(space, "a", k=5, cf_nb=50, min_freq=50)
    assert neigh == ["b"]  # "c" gated out by cf_nb
    assert flag is True
    with pytest.raises(KeyError):
        neighborhood(space, "zz", k=2)
    with pytest.raises(ValueError):
        neighborhood(space, "c", k=2, cf_nb=50, min_freq=50)  # below floor
    with pytest.raises(ValueError):
        neighborhood(space, "a", k=2, cf_nb=1000, min_freq=1)  # empty pool


def test_neighbor_ties_break_lexicographically():
    # b and c are identical vectors, equidistant from a
    space = _space([[1, 0], [0, 1], [0, 1], [1, 1]])
    table = nearest_neighbors(space, ["a"], k=2, pool_terms=["b", "c", "d"])
    assert table.neighbors("a") == ["d", "b"]


def test_query_excluded_from_own_neighbors():
    space = _space([[1, 0], [1, 0], [0, 1]])
    table = nearest_neighbors(space, ["a"], k=3)
    assert "a" not in table.neighbors("a")
    assert table.neighbors("a")[0] == "b"


def test_euclidean_metric():
    space = _space([[0, 0], [3, 4], [1, 0]])
    table = nearest_neighbors(space, ["a"], k=2, metric="euclidean")
    assert table.neighbors("a") == ["c", "b"]
    assert table.distances[0][0] == pytest.approx(1.0)
    assert table.distances[0][1] == pytest.approx(5.0)


def _brute_force_neighbors(space, query, k, pool):
    # independent implementation: reuses the normalized-vector definition only
    vocab = space.vocab
    q = space.vectors[vocab.index(query)].astype(np.float64)
    q = q / np.linalg.norm(q)
    scored = []
    for t in pool:
        if t == query:
            continue
        v = space.vectors[vocab.index(t)].astype(np.float64)
        v = v / np.linalg.norm(v)
        scored.append((1.0 - float(q @ v), t))
    scored.sort()
    return [t for _, t in scored[:k]]


def test_neighbors_match_brute_force_on_random_spaces():
    rng = np.random.default_rng(99)
    for _ in range(5):
        n = int(rng.integers(20, 60))
        vectors = rng.normal(size=(n, 8)).astype(np.float32)
        terms = [f"w{i:03d}" for i in range(n)]
        space = EmbeddingSpace(Vocabulary(terms, [100] * n), vectors)
        table = nearest_neighbors(space, terms, k=7)
        for t in terms:
            assert table.neighbors(t) == _brute_force_neighbors(space, t, 7, terms)


def test_binary_roundtrip(tmp_path):
    space = _space([[0.5, -1.25], [3.0, 4.0]], freqs=[7, 3])
    path = tmp_path / "emb.bin"
    save_binary(space, path)
    loaded = load_binary(path)
    assert loaded.vocab.terms == space.vocab.terms
    assert loaded.vocab.freqs.tolist() == [7, 3]
    assert np.array_equal(loaded.vectors, space.vectors)
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"not an embedding file")
        load_binary(bad)


def test_text_roundtrip(tmp_path):
    space = _space([[0.125, -1.5], [2.0, 0.0625]], freqs=[9, 4])
    emb_path = tmp_path / "emb.txt"
    csv_path = tmp_path / "vocab.csv"
    save_text(space, emb_path)
    space.vocab.to_csv(csv_path)
    loaded = load_text(emb_path, vocab_csv=csv_path)
    assert loaded.vocab.terms == space.vocab.terms
    assert loaded.vocab.freq("a") == 9
    assert np.allclose(loaded.vectors, space.vectors, atol=1e-6)
    bare = load_text(emb_path)
    assert bare.vocab.freq("a") == 1  # frequencies defaulted without the CSV


def _tiny_corpus(rng, n_docs=120, doc_len=30):
    # topical micro-corpus: "sun/moon/star" co-occur, "cat/dog/pet" co-occur
    groups = [["sun", "moon", "star", "sky"], ["cat", "dog", "pet", "fur"]]
    docs = []
    for _ in range(n_docs):
        g = groups[int(rng.integers(2))]
        docs.append([g[int(rng.integers(len(g)))] for _ in range(doc_len)])
    return docs


def test_training_is_deterministic_with_one_worker():
    rng = np.random.default_rng(0)
    docs = _tiny_corpus(rng)
    counts = {}
    for d in docs:
        for t in d:
            counts[t] = counts.get(t, 0) + 1
    vocab = Vocabulary.from_counts(counts)
    params = CbowParams(dim=16, epochs=3, seed=42)
    s1 = train_embeddings(docs, vocab, params)
    s2 = train_embeddings(docs, vocab, params)
    assert np.array_equal(s1.vectors, s2.vectors)
    s3 = train_embeddings(docs, vocab, params.with_seed(43))
    assert not np.array_equal(s1.vectors, s3.vectors)


def test_zero_epochs_returns_initialization():
    vocab = _toy_vocab()
    docs = [["t0", "t1", "t2", "t3"]] * 5
    params = CbowParams(dim=8, epochs=0, seed=7)
    space = train_embeddings(docs, vocab, params)
    rng = np.random.default_rng(7)
    expected = rng.uniform(-0.5 / 8, 0.5 / 8, size=(len(vocab), 8)).astype(np.float32)
    assert np.array_equal(space.vectors, expected)


def test_topical_cooccurrence_separates_groups():
    rng = np.random.default_rng(5)
    docs = _tiny_corpus(rng, n_docs=400, doc_len=40)
    counts = {}
    for d in docs:
        for t in d:
            counts[t] = counts.get(t, 0) + 1
    vocab = Vocabulary.from_counts(counts)
    space = train_embeddings(docs, vocab, CbowParams(dim=24, epochs=8, seed=3))
    same = cosine_distance(space.vector("sun"), space.vector("moon"))
    cross = cosine_distance(space.vector("sun"), space.vector("dog"))
    assert same < cross


def test_training_loss_decreases():
    rng = np.random.default_rng(11)
    docs = _tiny_corpus(rng, n_docs=300, doc_len=40)
    counts = {}
    for d in docs:
        for t in d:
            counts[t] = counts.get(t, 0) + 1
    vocab = Vocabulary.from_counts(counts)
    space = train_embeddings(docs, vocab, CbowParams(dim=16, epochs=20, seed=1))
    losses = space.train_losses
    assert losses.shape == (20,)
    # averaged per epoch, non-increasing over the last 5 epochs with at
    # most one non-monotone step
    tail = losses[-5:]
    violations = sum(1 for i in range(len(tail) - 1) if tail[i + 1] > tail[i])
    assert violations <= 1
    assert losses[-1] < losses[0]


def test_parallel_mode_produces_usable_space():
    rng = np.random.default_rng(2)
    docs = _tiny_corpus(rng, n_docs=200, doc_len=30)
    counts = {}
    for d in docs:
        for t in d:
            counts[t] = counts.get(t, 0) + 1
    vocab = Vocabulary.from_counts(counts)
    space = train_embeddings(docs, vocab, CbowParams(dim=16, epochs=4, seed=9, workers=2))
    assert np.all(np.isfinite(space.vectors))
    same = cosine_distance(space.vector("cat"), space.vector("dog"))
    cross = cosine_distance(space.vector("cat"), space.vector("star"))
    assert same < cross


def test_params_validation():
    with pytest.raises(ValueError):
        CbowParams(dim=0)
    with pytest.raises(ValueError):
        CbowParams(epochs=-1)
    with pytest.raises(ValueError):
        CbowParams(lr=0.01, lr_min=0.02)
    with pytest.raises(ValueError):
        CbowParams(workers=0)


def test_train_rejects_empty_inputs():
    vocab = _toy_vocab()
    with pytest.raises(ValueError):
        train_embeddings([["zz"]], vocab, CbowParams(dim=4, epochs=1))
    with pytest.raises(ValueError):
        train_embeddings([], Vocabulary([], []), CbowParams(dim=4, epochs=1))
