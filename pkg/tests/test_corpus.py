import logging

import numpy as np
import pytest

from pptlab.corpus import (
    DEFAULT_SSC_THRESHOLDS,
    Document,
    build_nsp3,
    build_nss,
    build_pseudo_ssc,
    build_unified_mc,
    lexicon_annotator,
    load_dataset,
    make_document,
    option_config_for,
    split_sentences,
    split_train_valid,
    write_dataset,
    example_key,
)
from pptlab.tokenization import tokenize


def words(n, tag):
    return " ".join(f"{tag}{i}" for i in range(n))


def toy_corpus(n_docs=3, n_sents=4, sent_len=6):
    """Documents whose sentences all pass the 5-token filter."""
    return [
        Document(f"doc{d}", tuple(words(sent_len, f"d{d}s{s}w") for s in range(n_sents)))
        for d in range(n_docs)
    ]


def derive_nsp3_label(meta, corpus):
    """Oracle: re-derive the pair relation from provenance."""
    if meta["doc1"] != meta["doc2"]:
        return 0
    if meta["sent2"] == meta["sent1"] + 1:
        return 2
    assert abs(meta["sent2"] - meta["sent1"]) >= 2
    return 1


def test_split_sentences():
    text = "Hello there friend. How are you doing today? Great to hear!  Trailing bit"
    assert split_sentences(text) == (
        "Hello there friend",
        "How are you doing today",
        "Great to hear",
        "Trailing bit",
    )
    assert split_sentences("") == ()
    assert split_sentences("No terminal punctuation") == ("No terminal punctuation",)


def test_option_config_rows_from_spec_examples():
    c6 = option_config_for(6)
    assert (c6.max_query_len, c6.max_option_len) == (300, 40)
    assert (c6.n_positive, c6.n_neg_same_doc, c6.n_neg_diff_doc) == (1, 1, 4)
    c2 = option_config_for(2)
    assert (c2.max_query_len, c2.max_option_len, c2.n_positive, c2.n_neg_same_doc, c2.n_neg_diff_doc) == (400, 50, 1, 1, 0)
    c16 = option_config_for(16)
    assert (c16.max_query_len, c16.max_option_len, c16.n_positive, c16.n_neg_same_doc, c16.n_neg_diff_doc) == (150, 20, 1, 3, 13)
    with pytest.raises(ValueError, match="unsupported option count"):
        option_config_for(17)
    with pytest.raises(ValueError, match="unsupported option count"):
        option_config_for(1)


def test_nsp3_members_of_exhaustive_enumeration():
    corpus = toy_corpus()
    examples = build_nsp3(corpus, n=30, seed=11)
    assert len(examples) == 30

    index = {doc.id: doc for doc in corpus}
    valid_pairs = set()
    ids = [doc.id for doc in corpus]
    for d1 in ids:
        for i in range(len(index[d1].sentences)):
            for d2 in ids:
                for j in range(len(index[d2].sentences)):
                    if d1 == d2 and i == j:
                        continue
                    if d1 == d2 and j == i - 1:
                        continue  # reverse-adjacent pairs are never emitted
                    label = 0 if d1 != d2 else (2 if j == i + 1 else 1)
                    valid_pairs.add((d1, i, d2, j, label))

    for ex in examples:
        key = (ex.meta["doc1"], ex.meta["sent1"], ex.meta["doc2"], ex.meta["sent2"], ex.label)
        assert key in valid_pairs
        assert ex.label == derive_nsp3_label(ex.meta, corpus)
        assert ex.target_token == ["no", "maybe", "yes"][ex.label]


def test_nsp3_label_mixture_uniform():
    examples = build_nsp3(toy_corpus(), n=31, seed=0)
    counts = [sum(1 for ex in examples if ex.label == y) for y in range(3)]
    assert max(counts) - min(counts) <= 1


def test_nsp3_filters_short_sentences():
    corpus = [
        Document("short", ("tiny one", words(6, "a"), words(6, "b"), words(6, "c"))),
        Document("other", tuple(words(6, f"o{s}") for s in range(4))),
    ]
    examples = build_nsp3(corpus, n=60, seed=3)
    for ex in examples:
        assert len(tokenize(ex.slots["s1"])) >= 5
        assert len(tokenize(ex.slots["s2"])) >= 5
        # the 2-token sentence never appears
        assert ex.meta["doc1"] != "short" or ex.meta["sent1"] != 0
        assert ex.meta["doc2"] != "short" or ex.meta["sent2"] != 0


def test_nsp3_ratio_filter():
    corpus = [
        Document("big", (words(5, "q"), words(800, "w"), words(5, "e"), words(5, "r"))),
        Document("other", tuple(words(6, f"o{s}") for s in range(4))),
    ]
    examples = build_nsp3(corpus, n=60, seed=4)
    for ex in examples:
        a = len(tokenize(ex.slots["s1"]))
        b = len(tokenize(ex.slots["s2"]))
        assert max(a, b) / min(a, b) <= 100


def test_nsp3_impossible_label_errors():
    # two 2-sentence documents: adjacency and cross-document pairs exist,
    # but no same-document non-adjacent pair does
    corpus = [
        Document("a", (words(6, "a0"), words(6, "a1"))),
        Document("b", (words(6, "b0"), words(6, "b1"))),
    ]
    with pytest.raises(ValueError, match="insufficient corpus for label 1"):
        build_nsp3(corpus, n=30, seed=0)


def test_nsp3_deterministic():
    a = build_nsp3(toy_corpus(), n=20, seed=42)
    b = build_nsp3(toy_corpus(), n=20, seed=42)
    assert a == b
    c = build_nsp3(toy_corpus(), n=20, seed=43)
    assert a != c


def test_nss_positive_is_adjacent():
    corpus = toy_corpus(n_docs=6, n_sents=5)
    index = {doc.id: doc for doc in corpus}
    examples = build_nss(corpus, n=40, seed=7)
    for ex in examples:
        assert ex.task == "MCC"
        q_doc, q_sent = ex.meta["query_doc"], ex.meta["query_sent"]
        options = ex.meta["options"]
        assert len(options) == 6
        # exactly one option is the true adjacent sentence of the query
        adjacent = [i for i, (d, s) in enumerate(options) if d == q_doc and s == q_sent + 1]
        assert len(adjacent) == 1
        assert adjacent[0] + 1 == ex.label == ex.meta["answer_position"]
        assert ex.target_token == "abcdef"[ex.label - 1]
        # same-document negatives are non-adjacent to the query
        for d, s in options:
            if d == q_doc and s != q_sent + 1:
                assert abs(s - q_sent) >= 2
        # cross-document negatives come from distinct documents
        neg_docs = [d for d, s in options if d != q_doc]
        assert len(neg_docs) == len(set(neg_docs)) == 4
        assert all(len(tokenize(index[d].sentences[s])) >= 5 for d, s in options)


def test_nss_answer_position_uniform():
    examples = build_nss(toy_corpus(n_docs=8, n_sents=5), n=600, seed=5)
    counts = np.bincount([ex.label for ex in examples], minlength=7)[1:]
    # multinomial: mean 100, sigma = sqrt(600 * (1/6)(5/6)) ~ 9.13
    assert np.all(np.abs(counts - 100) <= 3 * 9.13)


def test_nss_truncates_option_tail():
    long_opt = words(91, "L")
    corpus = [Document("d", (words(6, "q"), long_opt, words(6, "z")))]
    examples = build_nss(corpus, n=5, seed=1, num_options=2, max_option_len=86)
    for ex in examples:
        pos = ex.label
        opt = ex.slots[f"s{pos}"]
        assert len(tokenize(opt)) == 86
        assert tokenize(opt) == tokenize(long_opt)[:86]


def test_nss_insufficient_documents():
    with pytest.raises(ValueError, match="insufficient distinct documents"):
        build_nss(toy_corpus(n_docs=3), n=5, seed=0, num_options=6)


def test_unified_counts_match_config_rows():
    corpus = toy_corpus(n_docs=16, n_sents=6)
    examples = build_unified_mc(corpus, n=200, seed=9)
    for ex in examples:
        n_opt = ex.meta["num_options"]
        assert 2 <= n_opt <= 16
        cfg = option_config_for(n_opt)
        assert len(ex.meta["options"]) == n_opt
        q_doc = ex.meta["query_doc"]
        same = [1 for d, s in ex.meta["options"] if d == q_doc and s != ex.meta["query_sent"] + 1]
        diff = [1 for d, s in ex.meta["options"] if d != q_doc]
        assert len(same) == cfg.n_neg_same_doc
        assert len(diff) == cfg.effective_neg_diff
        assert 1 + len(same) + len(diff) == n_opt
        for i in range(1, n_opt + 1):
            assert len(tokenize(ex.slots[f"s{i}"])) <= cfg.max_option_len
        assert len(tokenize(ex.slots["sq"])) <= cfg.max_query_len
        assert ex.task == "UNIFIED_MC"


def test_unified_option_count_histogram_uniform():
    corpus = toy_corpus(n_docs=16, n_sents=6)
    examples = build_unified_mc(corpus, n=1500, seed=2)
    counts = np.bincount([ex.meta["num_options"] for ex in examples], minlength=17)[2:]
    # 15 cells: mean 100, sigma = sqrt(1500 * (1/15)(14/15)) ~ 9.66
    assert counts.shape == (15,)
    assert np.all(np.abs(counts - 100) <= 3 * 9.66)


def sentiment_corpus():
    sentences = [
        "the film was terrible awful dreadful throughout",
        "a horrible and awful mess worst of the year",
        "rather bad and boring for long stretches",
        "the plot was dull weak and tedious",
        "seven plain words describe the movie here",
        "the staging felt ordinary with steady pacing",
        "a good and pleasant evening at the pictures",
        "solid decent work from the whole cast",
        "great excellent wonderful amazing in every way",
        "loved it superb and amazing best picture",
    ] * 4
    text = ". ".join(sentences) + "."
    return [make_document("senti", text)]


def test_pseudo_ssc_respects_thresholds():
    corpus = sentiment_corpus()
    examples = build_pseudo_ssc(corpus, lexicon_annotator, n=30, seed=0)
    assert examples
    for ex in examples:
        assert ex.meta["confidence"] >= DEFAULT_SSC_THRESHOLDS[ex.label]
        assert ex.target_token == ["terrible", "bad", "maybe", "good", "great"][ex.label]


def test_pseudo_ssc_rejects_below_threshold():
    corpus = sentiment_corpus()
    with pytest.raises(ValueError, match="annotator produced nothing above thresholds"):
        build_pseudo_ssc(corpus, lambda s: (0, 0.94), n=10, seed=0)


def test_pseudo_ssc_accepts_at_threshold():
    corpus = sentiment_corpus()
    examples = build_pseudo_ssc(corpus, lambda s: (4, 0.70), n=10, seed=0)
    assert len(examples) == 10
    assert all(ex.label == 4 and ex.target_token == "great" for ex in examples)


def test_pseudo_ssc_constant_annotator_warns(caplog):
    corpus = sentiment_corpus()
    with caplog.at_level(logging.WARNING):
        examples = build_pseudo_ssc(corpus, lambda s: (2, 1.0), n=10, seed=0)
    assert len(examples) == 10
    assert all(ex.label == 2 and ex.target_token == "maybe" for ex in examples)
    assert any("empty" in rec.message for rec in caplog.records)


def test_pseudo_ssc_balances_labels():
    corpus = sentiment_corpus()
    examples = build_pseudo_ssc(corpus, lexicon_annotator, n=20, seed=1)
    counts = {}
    for ex in examples:
        counts[ex.label] = counts.get(ex.label, 0) + 1
    present = [c for c in counts.values()]
    assert max(present) - min(present) <= 1 or len(examples) < 20


def test_lexicon_annotator_contract():
    label, conf = lexicon_annotator("a great excellent superb show")
    assert label == 4 and conf >= 0.70
    label, conf = lexicon_annotator("terrible awful horrible stuff everywhere")
    assert label == 0 and conf >= 0.95
    label, conf = lexicon_annotator("just a single awful word")
    assert label == 0 and conf < 0.95  # rejected by the 0.95 gate downstream
    label, conf = lexicon_annotator("nothing with sentiment at all")
    assert label == 2 and conf == 0.5


def test_write_dataset_deterministic_and_disjoint(tmp_path):
    corpus = toy_corpus(n_docs=4, n_sents=5)
    examples = build_nsp3(corpus, n=100, seed=3)
    t1, v1 = write_dataset(examples, tmp_path / "a", "nsp3", seed=0)
    t2, v2 = write_dataset(examples, tmp_path / "b", "nsp3", seed=0)
    assert t1.read_bytes() == t2.read_bytes()
    assert v1.read_bytes() == v2.read_bytes()
    train = load_dataset(t1)
    valid = load_dataset(v1)
    assert len(train) + len(valid) == len(examples)
    assert valid  # 5% of 100, at least one group held out
    assert {example_key(e) for e in train}.isdisjoint({example_key(e) for e in valid})


def test_split_train_valid_meta_disjoint():
    corpus = toy_corpus(n_docs=4, n_sents=5)
    examples = build_nsp3(corpus, n=200, seed=8)
    train, valid = split_train_valid(examples, 0.05, seed=1)
    assert {example_key(e) for e in train}.isdisjoint({example_key(e) for e in valid})
    assert len(train) + len(valid) == len(examples)
