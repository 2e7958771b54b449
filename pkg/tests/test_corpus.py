import math

import numpy as np
import pytest

from gaboost import corpus
from gaboost.corpus import CorpusError, Document

# word -> stem pairs from the classic Porter test vocabulary
PORTER_VECTORS = {
    "caresses": "caress", "ponies": "poni", "ties": "ti", "caress": "caress", "cats": "cat",
    "feed": "feed", "agreed": "agre", "plastered": "plaster", "bled": "bled",
    "motoring": "motor", "sing": "sing", "conflated": "conflat", "troubled": "troubl",
    "sized": "size", "hopping": "hop", "tanned": "tan", "falling": "fall", "hissing": "hiss",
    "fizzed": "fizz", "failing": "fail", "filing": "file", "happy": "happi",
    "relational": "relat", "conditional": "condit", "rational": "ration",
    "generalizations": "gener", "oscillators": "oscil", "digitizer": "digit",
    "hopefulness": "hope", "goodness": "good", "allowance": "allow", "adjustable": "adjust",
    "replacement": "replac", "adoption": "adopt", "effective": "effect",
    "electrical": "electr", "triplicate": "triplic", "revival": "reviv", "airliner": "airlin",
    "dependent": "depend", "communism": "commun", "activate": "activ", "probate": "probat",
    "rate": "rate", "cease": "ceas", "roll": "roll", "a": "a", "as": "as", "is": "is",
}

# Porter is not idempotent on these: the first stem still ends in a removable suffix
NON_IDEMPOTENT = {"agreed", "cease", "universal", "university", "reversal"}


def test_tokenize_examples():
    assert corpus.tokenize("") == []
    assert corpus.tokenize("Win FREE  entry!!") == ["win", "free", "entry"]
    assert corpus.analyze("Win FREE  entry!!") == ["win", "free", "entri"]
    assert corpus.tokenize("semi-final @user") == ["semi-final", "user"]


@pytest.mark.parametrize("word,stem", sorted(PORTER_VECTORS.items()))
def test_porter_vectors(word, stem):
    assert corpus.porter_stem(word) == stem


def test_stemming_idempotence_outside_known_exceptions():
    words = list(PORTER_VECTORS) + ["universal", "university", "reversal", "running",
                                    "connection", "connections", "national", "meeting"]
    failing = {w for w in words
               if corpus.porter_stem(corpus.porter_stem(w)) != corpus.porter_stem(w)}
    assert failing == NON_IDEMPOTENT & set(words)


def test_load_csv_order_and_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("text,label\nhello there,Ham\nwin cash,Spam\n", encoding="utf-8")
    docs = corpus.load_csv(p)
    assert docs == [Document("hello there", "Ham"), Document("win cash", "Spam")]

    p.write_text("text,label\nhello,Ham\nbuy,Junk\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="row 3"):
        corpus.load_csv(p)
    p.write_text("body,label\nhello,Ham\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="missing column"):
        corpus.load_csv(p)
    with pytest.raises(CorpusError, match="no such file"):
        corpus.load_csv(tmp_path / "nope.csv")


def test_latin1_input(tmp_path):
    p = tmp_path / "l.csv"
    p.write_bytes("text,label\ncaf\xe9 time,Ham\nfree prize,Spam\n".encode("iso-8859-1"))
    docs = corpus.load_csv(p, encoding="iso-8859-1")
    assert docs[0].text == "caf\xe9 time"
    # non-ASCII letters are separators
    assert corpus.tokenize(docs[0].text) == ["caf", "time"]


def test_fit_vocabulary_df():
    v = corpus.fit_vocabulary(["a b", "b c"])
    assert v.terms == ["a", "b", "c"] and v.df == [1, 2, 1]
    v = corpus.fit_vocabulary(["x x x"])
    assert v.terms == ["x"] and v.df == [1]
    with pytest.raises(CorpusError):
        corpus.fit_vocabulary([])


def test_tfidf_examples():
    docs = ["a b", "b c"]
    v = corpus.fit_vocabulary(docs)
    idf = corpus.idf_weights(v, 2)
    assert idf[v.index["b"]] == pytest.approx(1.0)
    assert idf[v.index["a"]] == pytest.approx(math.log(3 / 2) + 1)

    X = corpus.tfidf_transform(["b b"], v, n_fit_docs=2).toarray()
    assert X[0, v.index["b"]] == 1.0 and X.sum() == 1.0
    X = corpus.tfidf_transform(["zzz"], v, n_fit_docs=2)
    assert X.nnz == 0


def test_tfidf_rows_unit_norm(text_csv):
    ds = corpus.load_dataset(text_csv)
    norms = np.sqrt(np.asarray(ds.matrix.multiply(ds.matrix).sum(axis=1)).ravel())
    assert np.all(np.abs(norms[norms > 0] - 1) < 1e-9)
    assert ds.n_features == len(ds.vocabulary)


def test_encode_labels():
    assert corpus.encode_labels(["Ham", "Spam"]).tolist() == [0, 1]
    assert corpus.encode_labels(["Ham", "Ham"]).tolist() == [0, 0]
    assert corpus.encode_labels(["Spam", "Spam", "Ham"]).tolist() == [1, 1, 0]
    assert corpus.encode_labels(["Ham", "Spam"], positive_label_name="Ham").tolist() == [1, 0]
    with pytest.raises(CorpusError):
        corpus.encode_labels(["Junk"])


def test_pipeline_determinism_and_roundtrip(text_csv, tmp_path):
    a = corpus.load_dataset(text_csv)
    b = corpus.load_dataset(text_csv)
    corpus.save_dataset(a, tmp_path / "a")
    corpus.save_dataset(b, tmp_path / "b")
    for name in ("matrix.txt", "vocab.tsv", "labels.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    back = corpus.load_saved_dataset(tmp_path / "a")
    assert back.vocabulary.terms == a.vocabulary.terms
    assert back.labels.tolist() == a.labels.tolist()
    assert np.allclose(back.matrix.toarray(), a.matrix.toarray(), rtol=1e-5, atol=0)
