import json

import numpy as np
import pytest

from psyling import lda
from psyling.corpus import Corpus, UserDocument
from psyling.synthetic import planted_topic_corpus

from oracles import lda_exact_posterior


def corpus_of(*docs):
    return Corpus([UserDocument(f"d{i}", toks) for i, toks in enumerate(docs)])


def disjoint_pair(seed):
    rng = np.random.default_rng(100 + seed)
    a = [f"a{j}" for j in rng.integers(0, 5, 50)]
    b = [f"b{j}" for j in rng.integers(0, 5, 50)]
    return corpus_of(a, b)


@pytest.fixture(scope="module")
def planted():
    pc = planted_topic_corpus(n_users=60, n_topics=3, words_per_topic=15, doc_length=120, seed=3)
    corpus = pc.corpus()
    model, dists = lda.train(corpus, 3, iterations=300, seed=5)
    return corpus, model, dists


class TestVocabulary:
    def test_min_doc_freq(self):
        v = lda.build_vocabulary(corpus_of(["a"], ["a", "b"]), 2)
        assert v.words == ("a",)

    def test_all_tokens(self):
        v = lda.build_vocabulary(corpus_of(["c", "a"], ["a", "b"]), 1)
        assert v.words == ("a", "b", "c")
        assert [v.id_of[w] for w in v.words] == [0, 1, 2]
        assert v.word_of[2] == "c"

    def test_deterministic(self):
        c = corpus_of(["z", "y"], ["x"])
        assert lda.build_vocabulary(c) == lda.build_vocabulary(corpus_of(["z", "y"], ["x"]))

    def test_empty(self):
        with pytest.raises(lda.LDAError):
            lda.build_vocabulary(corpus_of(["a"], ["b"]), 3)


class TestTrain:
    def test_single_topic(self):
        model, dists = lda.train(corpus_of(["a", "b"], ["b", "c", "c"]), 1, iterations=5)
        for d in dists:
            np.testing.assert_array_equal(d.theta, [1.0])
        assert model.n_k.tolist() == [5]

    @pytest.mark.parametrize("seed", range(5))
    def test_disjoint_vocabularies(self, seed):
        _, dists = lda.train(disjoint_pair(seed), 2, iterations=200, seed=seed)
        top = [int(np.argmax(d.theta)) for d in dists]
        assert all(d.theta.max() > 0.9 for d in dists)
        assert top[0] != top[1]

    def test_one_repeated_word(self):
        _, (d,) = lda.train(corpus_of(["ww", "ww", "ww"]), 2, alpha=0.1, iterations=50, seed=1)
        assert d.theta.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((d.theta > 0) & (d.theta < 1))

    def test_defaults(self, planted):
        _, model, _ = planted
        assert model.alpha == pytest.approx(5.0 / 3)
        assert model.beta == 0.01
        assert model.meta["iterations"] == 300 and model.meta["seed"] == 5

    def test_normalized_and_positive(self, planted):
        _, _, dists = planted
        for d in dists:
            assert abs(d.theta.sum() - 1.0) < 1e-9
            assert np.all(d.theta > 0)

    def test_deterministic(self):
        c = disjoint_pair(0)
        m1, d1 = lda.train(c, 3, iterations=20, seed=9)
        m2, d2 = lda.train(c, 3, iterations=20, seed=9)
        assert m1 == m2
        for a, b in zip(d1, d2):
            np.testing.assert_array_equal(a.theta, b.theta)

    def test_out_of_vocabulary_document(self):
        c = corpus_of(["aa", "bb"], ["cc"])
        vocab = lda.build_vocabulary(corpus_of(["aa", "bb"]))
        with pytest.raises(lda.LDAError, match="d1"):
            lda.train(c, 2, vocabulary=vocab)

    def test_bad_arguments(self):
        c = corpus_of(["aa"])
        with pytest.raises(lda.LDAError):
            lda.train(c, 0)
        with pytest.raises(lda.LDAError):
            lda.train(c, 2, iterations=0)
        with pytest.raises(lda.LDAError):
            lda.train(c, 2, beta=0.0)


class TestSampler:
    def test_count_conservation(self):
        rng = np.random.default_rng(0)
        docs = [rng.integers(0, 30, n) for n in (40, 10, 25)]
        s = lda.GibbsSampler(docs, 30, 4, 0.5, 0.1, seed=2)
        for _ in range(25):
            s.sweep()
            s.check_counts()
            assert s.n_k.sum() == 75
            np.testing.assert_array_equal(s.n_dk.sum(axis=1), [40, 10, 25])

    def test_identical_trajectories(self):
        docs = [np.array([0, 1, 2, 1]), np.array([2, 2, 0])]
        a = lda.GibbsSampler(docs, 3, 2, 0.3, 0.2, seed=4)
        b = lda.GibbsSampler(docs, 3, 2, 0.3, 0.2, seed=4)
        for _ in range(30):
            a.sweep()
            b.sweep()
            np.testing.assert_array_equal(a.z, b.z)

    def test_matches_enumerated_posterior_two_docs(self):
        docs = [[0, 1], [1]]
        exact = lda_exact_posterior(docs, V=2, K=2, alpha=0.5, beta=0.3)
        s = lda.GibbsSampler([np.array(d) for d in docs], 2, 2, 0.5, 0.3, seed=12)
        s.sweep(500)
        counts = {}
        for _ in range(20000):
            s.sweep()
            key = tuple(int(k) for k in s.z)
            counts[key] = counts.get(key, 0) + 1
        tv = 0.5 * sum(abs(counts.get(z, 0) / 20000 - p) for z, p in exact.items())
        assert tv < 0.05


class TestInfer:
    def test_single_topic(self):
        model, _ = lda.train(corpus_of(["aa", "bb"]), 1, iterations=3)
        d = lda.infer(model, UserDocument("x", ("aa", "zz")), 20, 5)
        np.testing.assert_array_equal(d.theta, [1.0])

    def test_self_consistency(self, planted):
        corpus, model, dists = planted
        for i in (0, 17, 42):
            dist = [np.abs(lda.infer(model, corpus.documents[i], 200, 100, seed=s).theta - dists[i].theta).sum()
                    for s in range(5)]
            assert np.median(dist) < 0.2

    def test_fully_out_of_vocabulary(self, planted):
        _, model, _ = planted
        with pytest.raises(lda.LDAError, match="ghost"):
            lda.infer(model, UserDocument("ghost", ("nothing", "known")))

    def test_oov_tokens_skipped(self, planted):
        corpus, model, _ = planted
        doc = corpus.documents[0]
        noisy = UserDocument(doc.user_id, doc.tokens + ("unseen", "tokens"))
        a = lda.infer(model, doc, 30, 10, seed=3)
        b = lda.infer(model, noisy, 30, 10, seed=3)
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_deterministic_and_normalized(self, planted):
        corpus, model, _ = planted
        a = lda.infer(model, corpus.documents[1], 40, 10, seed=8)
        b = lda.infer(model, corpus.documents[1], 40, 10, seed=8)
        np.testing.assert_array_equal(a.theta, b.theta)
        assert abs(a.theta.sum() - 1) < 1e-9 and np.all(a.theta > 0)

    def test_one_word_document_follows_concentrated_topic(self):
        vocab = lda.Vocabulary(("aa", "bb"))
        model = lda.TopicModel(2, 0.1, 0.01, np.array([[2, 50], [40, 3]]), vocab)
        d = lda.infer(model, UserDocument("x", ("aa",)), 200, 50, seed=0)
        assert np.argmax(d.theta) == 1

    def test_burn_in_validation(self, planted):
        corpus, model, _ = planted
        with pytest.raises(lda.LDAError):
            lda.infer(model, corpus.documents[0], iterations=10, burn_in=10)

    def test_infer_corpus_uses_per_document_seeds(self, planted):
        corpus, model, _ = planted
        sub = Corpus(corpus.documents[:3])
        out = lda.infer_corpus(model, sub, 20, 5, seed=4)
        assert [d.user_id for d in out] == sub.user_ids
        np.testing.assert_array_equal(out[2].theta, lda.infer(model, sub.documents[2], 20, 5, seed=[4, 2]).theta)


class TestTopWords:
    model = lda.TopicModel(2, 0.5, 0.01, np.array([[5, 3, 0], [5, 5, 1]]), lda.Vocabulary(("a", "b", "c")))

    def test_ranked(self):
        assert lda.top_words(self.model, 0, 2) == ["a", "b"]

    def test_truncation(self):
        assert lda.top_words(self.model, 0, 10) == ["a", "b", "c"]

    def test_ties_lexicographic(self):
        assert lda.top_words(self.model, 1, 1) == ["a"]

    def test_out_of_range(self):
        with pytest.raises(lda.LDAError):
            lda.top_words(self.model, 2, 1)


class TestPersistence:
    def test_roundtrip(self, planted, tmp_path):
        _, model, _ = planted
        lda.save_model(model, tmp_path / "m.json")
        back = lda.load_model(tmp_path / "m.json")
        assert back == model
        np.testing.assert_array_equal(back.n_k, model.n_k)
        obj = json.loads((tmp_path / "m.json").read_text(encoding="utf-8"))
        assert obj["version"] == 1 and set(obj) == {"version", "K", "alpha", "beta", "vocab", "n_kw", "meta"}

    def test_truncated(self, planted, tmp_path):
        _, model, _ = planted
        lda.save_model(model, tmp_path / "m.json")
        text = (tmp_path / "m.json").read_text(encoding="utf-8")
        (tmp_path / "m.json").write_text(text[: len(text) // 2], encoding="utf-8")
        with pytest.raises(lda.ModelFormatError, match="corrupted"):
            lda.load_model(tmp_path / "m.json")

    def test_newer_version(self, planted, tmp_path):
        _, model, _ = planted
        lda.save_model(model, tmp_path / "m.json")
        obj = json.loads((tmp_path / "m.json").read_text(encoding="utf-8"))
        obj["version"] = 2
        (tmp_path / "m.json").write_text(json.dumps(obj), encoding="utf-8")
        with pytest.raises(lda.ModelFormatError, match="newer"):
            lda.load_model(tmp_path / "m.json")

    def test_shape_mismatch(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps(
            {"version": 1, "K": 2, "alpha": 1, "beta": 0.1, "vocab": ["a"], "n_kw": [[1, 2]]}), encoding="utf-8")
        with pytest.raises(lda.ModelFormatError):
            lda.load_model(tmp_path / "m.json")

    def test_frozen_counts(self, planted):
        _, model, _ = planted
        with pytest.raises(ValueError):
            model.n_kw[0, 0] = 7


def test_theta_matrix_columns(planted):
    corpus, _, dists = planted
    X = lda.theta_matrix(dists)
    assert X.column_names == ("topic_0", "topic_1", "topic_2")
    assert X.row_ids == tuple(corpus.user_ids)
