"""Text ingestion and TF-IDF vectorisation.

Pipeline: CSV rows -> tokens (split on anything outside ``[A-Za-z0-9-]``,
lowercased) -> Porter stems -> lexicographically ordered vocabulary ->
smoothed TF-IDF weights with L2-normalised rows -> 0/1 labels.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from nltk.stem.porter import PorterStemmer

DEFAULT_CLASSES = ("Ham", "Spam")

_SPLIT = re.compile(r"[^A-Za-z0-9\-]+")
_STEMMER = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    text: str
    label: str


@dataclass
class Vocabulary:
    terms: list[str]
    df: list[int]

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    def term(self, i: int) -> str:
        return self.terms[i]

    def to_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for i, (t, d) in enumerate(zip(self.terms, self.df)):
                fh.write(f"{i}\t{t}\t{d}\n")

    @classmethod
    def from_tsv(cls, path) -> "Vocabulary":
        terms, df = [], []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                idx, term, d = line.rstrip("\n").split("\t")
                if int(idx) != i:
                    raise CorpusError(f"{path}: index {idx} out of order at line {i + 1}")
                terms.append(term)
                df.append(int(d))
        return cls(terms, df)


@dataclass
class LabeledDataset:
    matrix: sp.csr_matrix
    labels: np.ndarray
    vocabulary: Vocabulary
    positive_label_name: str = "Spam"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.matrix.shape[0] != len(self.labels):
            raise CorpusError(
                f"matrix has {self.matrix.shape[0]} rows but {len(self.labels)} labels")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise CorpusError("labels must be 0/1")

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def positive_rate(self) -> float:
        return float(self.labels.mean()) if len(self.labels) else 0.0

    def subset(self, rows=None, features=None) -> tuple[sp.csr_matrix, np.ndarray]:
        X = self.matrix
        if rows is not None:
            X = X[np.asarray(rows)]
        if features is not None:
            X = X[:, np.asarray(features)]
        y = self.labels if rows is None else self.labels[np.asarray(rows)]
        return X, y


def load_csv(path, text_col: str = "text", label_col: str = "label",
             classes: tuple[str, str] = DEFAULT_CLASSES,
             encoding: str = "utf-8") -> list[Document]:
    """Read one :class:`Document` per data row, in file order."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"{path}: no such file")
    docs = []
    with open(path, encoding=encoding, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (text_col, label_col) if c not in header]
        if missing:
            raise CorpusError(f"{path}: missing column(s) {missing}; header is {header}")
        try:
            for row in reader:
                # header is line 1
                rowno = reader.line_num
                text, label = row.get(text_col), row.get(label_col)
                if text is None or label is None:
                    raise CorpusError(f"{path}: row {rowno} is truncated")
                label = label.strip()
                if label not in classes:
                    raise CorpusError(
                        f"{path}: row {rowno} has label {label!r}, expected one of {list(classes)}")
                if not text.strip():
                    raise CorpusError(f"{path}: row {rowno} has empty text")
                docs.append(Document(text, label))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CorpusError(f"{path}: unreadable row near line {reader.line_num}: {exc}") from exc
    return docs


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _SPLIT.split(text) if t]


@lru_cache(maxsize=200_000)
def porter_stem(token: str) -> str:
    return _STEMMER.stem(token)


def analyze(text: str) -> list[str]:
    return [porter_stem(t) for t in tokenize(text)]


def fit_vocabulary(docs) -> Vocabulary:
    """Every distinct stem becomes a feature; indices follow lexicographic order."""
    docs = list(docs)
    if not docs:
        raise CorpusError("cannot fit a vocabulary on an empty corpus")
    df: Counter[str] = Counter()
    for d in docs:
        df.update(set(analyze(_text(d))))
    terms = sorted(df)
    return Vocabulary(terms, [df[t] for t in terms])


def idf_weights(vocab: Vocabulary, n_docs: int) -> np.ndarray:
    df = np.asarray(vocab.df, dtype=np.float64)
    return np.log((1.0 + n_docs) / (1.0 + df)) + 1.0


def tfidf_transform(docs, vocab: Vocabulary, n_fit_docs: int | None = None) -> sp.csr_matrix:
    """Raw-count TF times smoothed IDF, rows scaled to unit L2 norm.

    ``n_fit_docs`` is the corpus size the vocabulary was fitted on; it defaults
    to ``len(docs)``. Out-of-vocabulary stems are dropped.
    """
    docs = list(docs)
    n_fit = len(docs) if n_fit_docs is None else n_fit_docs
    idf = idf_weights(vocab, n_fit)
    indptr, indices, data = [0], [], []
    for d in docs:
        counts = Counter(s for s in analyze(_text(d)) if s in vocab.index)
        cols = sorted(vocab.index[s] for s in counts)
        w = np.array([counts[vocab.terms[c]] * idf[c] for c in cols], dtype=np.float64)
        norm = math.sqrt(float(w @ w)) if len(w) else 0.0
        if norm > 0:
            w = w / norm
        indices.extend(cols)
        data.extend(w.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocab)),
    )


def encode_labels(docs, positive_label_name: str = "Spam",
                  classes: tuple[str, str] = DEFAULT_CLASSES) -> np.ndarray:
    out = []
    for i, d in enumerate(docs):
        label = d.label if isinstance(d, Document) else d
        if label not in classes:
            raise CorpusError(f"item {i}: unknown label {label!r}")
        out.append(1 if label == positive_label_name else 0)
    return np.asarray(out, dtype=np.int64)


def build_dataset(docs, positive_label_name: str = "Spam",
                  classes: tuple[str, str] = DEFAULT_CLASSES) -> LabeledDataset:
    docs = list(docs)
    vocab = fit_vocabulary(docs)
    X = tfidf_transform(docs, vocab)
    y = encode_labels(docs, positive_label_name, classes)
    return LabeledDataset(X, y, vocab, positive_label_name)


def load_dataset(path, text_col="text", label_col="label", classes=DEFAULT_CLASSES,
                 positive_label_name="Spam", encoding="utf-8") -> LabeledDataset:
    docs = load_csv(path, text_col, label_col, classes, encoding)
    return build_dataset(docs, positive_label_name, classes)


def _text(d) -> str:
    return d.text if isinstance(d, Document) else d


# on-disk matrix dump: "rows cols" header then "index:weight" pairs per row


def write_matrix(X: sp.csr_matrix, path) -> None:
    X = sp.csr_matrix(X)
    X.sort_indices()
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for i in range(X.shape[0]):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            fh.write(" ".join(f"{c}:{v:.6g}" for c, v in zip(X.indices[lo:hi], X.data[lo:hi])))
            fh.write("\n")


def read_matrix(path) -> sp.csr_matrix:
    with open(path, encoding="ascii") as fh:
        rows, cols = (int(x) for x in fh.readline().split())
        indptr, indices, data = [0], [], []
        for lineno, line in enumerate(fh, start=2):
            for pair in line.split():
                c, v = pair.split(":")
                indices.append(int(c))
                data.append(float(v))
            indptr.append(len(indices))
        if len(indptr) - 1 != rows:
            raise CorpusError(f"{path}: header says {rows} rows, found {len(indptr) - 1}")
    return sp.csr_matrix((data, indices, indptr), shape=(rows, cols), dtype=np.float64)


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(str(int(v)) for v in labels))
        fh.write("\n")


def read_labels(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return np.asarray([int(line) for line in fh if line.strip()], dtype=np.int64)


def save_dataset(ds: LabeledDataset, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"matrix": out_dir / "matrix.txt", "vocab": out_dir / "vocab.tsv",
             "labels": out_dir / "labels.txt"}
    write_matrix(ds.matrix, paths["matrix"])
    ds.vocabulary.to_tsv(paths["vocab"])
    write_labels(ds.labels, paths["labels"])
    return paths


def load_saved_dataset(out_dir, positive_label_name="Spam") -> LabeledDataset:
    out_dir = Path(out_dir)
    X = read_matrix(out_dir / "matrix.txt")
    vocab = Vocabulary.from_tsv(out_dir / "vocab.tsv")
    if X.shape[1] != len(vocab):
        raise CorpusError(f"{out_dir}: matrix has {X.shape[1]} columns, vocabulary {len(vocab)}")
    return LabeledDataset(X, read_labels(out_dir / "labels.txt"), vocab, positive_label_name)
