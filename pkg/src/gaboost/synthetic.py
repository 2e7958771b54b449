"""Synthetic sparse corpora with a known set of class-informative features."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from gaboost.corpus import LabeledDataset, Vocabulary


def make_corpus(n_rows: int = 500, n_features: int = 500, n_informative: int = 10,
                positive_rate: float = 0.3, noise_terms: float = 6.0,
                p_informative_pos: float = 0.35, p_informative_neg: float = 0.03,
                seed: int = 0) -> tuple[LabeledDataset, np.ndarray]:
    """TF-IDF-like nonnegative rows with unit L2 norm.

    Every row draws ~Poisson(``noise_terms``) uniformly chosen terms. Each of the
    ``n_informative`` informative terms (at random indices) additionally appears
    with probability ``p_informative_pos`` in positive rows and
    ``p_informative_neg`` in negative rows.

    Returns the dataset and the sorted informative indices.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n_rows) < positive_rate).astype(np.int64)
    if y.sum() == 0:
        y[0] = 1
    if y.sum() == n_rows:
        y[0] = 0
    informative = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    rows, cols, vals = [], [], []
    for i in range(n_rows):
        terms = set(rng.choice(n_features, size=rng.poisson(noise_terms), replace=True).tolist())
        p = p_informative_pos if y[i] else p_informative_neg
        terms.update(informative[rng.random(n_informative) < p].tolist())
        if not terms:
            terms = {int(rng.integers(n_features))}
        t = np.asarray(sorted(terms))
        w = rng.uniform(0.5, 1.5, size=len(t))
        w /= np.linalg.norm(w)
        rows.extend([i] * len(t))
        cols.extend(t.tolist())
        vals.extend(w.tolist())
    X = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_features), dtype=np.float64)
    df = np.bincount(np.asarray(cols), minlength=n_features)
    vocab = Vocabulary([f"t{j:05d}" for j in range(n_features)], [int(max(d, 1)) for d in df])
    return LabeledDataset(X, y, vocab), informative


def make_separable(n_rows: int = 200, n_features: int = 10, seed: int = 0):
    """Dense Gaussian rows labelled by the sign of a random linear score."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_rows, n_features))
    w = rng.normal(size=n_features)
    y = (X @ w > 0).astype(np.int64)
    return X, y
