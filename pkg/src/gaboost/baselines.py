"""Comparison arms: chi-square top-k feature selection and PCA projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from gaboost import evaluation, gbt

# untuned booster used by both comparison arms
DEFAULT_PARAMS = gbt.BoosterParams(learning_rate=0.3, n_estimators=100, max_depth=6,
                                   min_child_weight=1.0, gamma=0.0, subsample=1.0,
                                   colsample_bytree=1.0)


class BaselineError(ValueError):
    pass


def chi2_scores(X, y) -> np.ndarray:
    """Chi-square statistic of each feature's per-class value sums against the class prior.

    Sums are exactly rounded (``math.fsum``), so scores do not depend on the
    storage order of the matrix.
    """
    y = np.asarray(y).ravel()
    X = sp.csc_matrix(X, dtype=np.float64)
    if X.shape[0] != len(y):
        raise BaselineError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    if X.nnz and X.data.min() < 0:
        raise BaselineError("chi2 needs nonnegative feature values")
    classes, y_idx = np.unique(y, return_inverse=True)
    class_prob = np.bincount(y_idx) / len(y)
    scores = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        lo, hi = X.indptr[j], X.indptr[j + 1]
        vals, cls = X.data[lo:hi], y_idx[X.indices[lo:hi]]
        total = math.fsum(vals)
        chi = 0.0
        for c in range(len(classes)):
            expected = class_prob[c] * total
            if expected > 0:
                chi += (math.fsum(vals[cls == c]) - expected) ** 2 / expected
        scores[j] = chi
    return scores


def chi2_select(scores, k: int) -> np.ndarray:
    """Indices of the k highest scores, ties broken toward the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if k > len(scores):
        raise BaselineError(f"k={k} exceeds the {len(scores)} available features")
    if k < 0:
        raise BaselineError("k must be >= 0")
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k]


def write_chi2_dump(scores, vocabulary, path, selected=None) -> None:
    idx = chi2_select(scores, len(scores)) if selected is None else np.asarray(selected)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for i in idx:
            term = vocabulary.term(int(i)) if vocabulary is not None else str(i)
            fh.write(f"{int(i)}\t{term}\t{scores[i]:.10g}\n")


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x cols, orthonormal rows
    explained_variance: np.ndarray
    iterations: list[int]
    total_variance: float = 0.0

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


class PcaConvergenceError(RuntimeError):
    pass


def _center_ops(X):
    """Mat-vec products with the centred data without forming it."""
    n = X.shape[0]
    mean = np.asarray(X.mean(axis=0)).ravel()

    def xc_dot(v):  # (X - 1 mean^T) v
        return np.asarray(X @ v).ravel() - mean @ v

    def xct_dot(u):  # (X - 1 mean^T)^T u
        return np.asarray(X.T @ u).ravel() - mean * u.sum()

    return n, mean, xc_dot, xct_dot


def pca_fit(X, k: int, tol: float = 1e-9, max_iter: int = 1000, seed: int = 0) -> PcaModel:
    """Top-k principal axes by power iteration on the covariance with deflation.

    The covariance (divisor n - 1) is applied implicitly, so sparse inputs are
    never densified. Each component's largest-magnitude entry is positive.
    """
    X = sp.csr_matrix(X, dtype=np.float64) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    rows, cols = X.shape
    if not 1 <= k <= min(rows - 1, cols):
        raise BaselineError(f"k={k} must lie in [1, {min(rows - 1, cols)}]")
    n, mean, xc_dot, xct_dot = _center_ops(X)
    comps = np.zeros((k, cols))
    eig = np.zeros(k)
    iters = []
    rng = np.random.default_rng(seed)

    def cov_dot(v, upto):
        w = xct_dot(xc_dot(v)) / (n - 1)
        if upto:
            w -= comps[:upto].T @ (eig[:upto] * (comps[:upto] @ v))
        return w

    for c in range(k):
        v = rng.standard_normal(cols)
        v -= comps[:c].T @ (comps[:c] @ v)
        v /= np.linalg.norm(v)
        for it in range(1, max_iter + 1):
            w = cov_dot(v, c)
            w -= comps[:c].T @ (comps[:c] @ w)
            norm = np.linalg.norm(w)
            if norm == 0.0:
                # remaining variance is zero: any orthogonal direction will do
                break
            w /= norm
            delta = min(np.linalg.norm(w - v), np.linalg.norm(w + v))
            v = w
            if delta < tol:
                break
        else:
            raise PcaConvergenceError(
                f"component {c + 1} did not converge in {max_iter} iterations")
        iters.append(it)
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            v = -v
        comps[c] = v
        eig[c] = float(v @ cov_dot(v, 0))
    sq = (np.asarray(X.multiply(X).sum(axis=0)).ravel() if sp.issparse(X)
          else (X * X).sum(axis=0))
    total = float((sq - n * mean ** 2).sum() / (n - 1))
    return PcaModel(mean, comps, eig, iters, total)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = X if sp.issparse(X) else np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.mean.shape[0]:
        raise BaselineError(f"model expects {model.mean.shape[0]} columns, X has {X.shape[1]}")
    return np.asarray(X @ model.components.T) - model.mean @ model.components.T


def pca_sweep(X, y, k_range, repeats: int = 50, folds: int = 10, seed: int = 0,
              params: gbt.BoosterParams = DEFAULT_PARAMS, threads: int = 1):
    """Cross-validated accuracy of boosted trees on the first k principal
    components, for each k. PCA is fitted inside every training fold; the
    components are nested, so one fit per fold at max(k) serves every k.

    Returns rows of (k, mean accuracy, population SD).
    """
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range or k_range[0] < 1:
        raise BaselineError("k_range must contain positive component counts")
    y = np.asarray(y, dtype=np.int64)
    X = sp.csr_matrix(X) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    k_max = k_range[-1]
    plans = [p for r in range(repeats)
             for p in evaluation.stratified_folds(y, folds, seed + r, repeat=r)]

    def run(plan):
        model = pca_fit(X[plan.train], k_max, seed=seed)
        Ztr = pca_transform(model, X[plan.train])
        Zte = pca_transform(model, X[plan.test])
        out = []
        for k in k_range:
            local = evaluation.FoldPlan(plan.repeat, plan.fold,
                                        np.arange(len(plan.train)),
                                        np.arange(len(plan.train), len(plan.train) + len(plan.test)))
            Z = np.vstack([Ztr[:, :k], Zte[:, :k]])
            yy = np.concatenate([y[plan.train], y[plan.test]])
            out.append(evaluation.evaluate_fold(Z, yy, local, params).report.accuracy)
        return out

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            acc = np.asarray(list(pool.map(run, plans)))
    else:
        acc = np.asarray([run(p) for p in plans])
    return [(k, float(acc[:, i].mean()), float(acc[:, i].std())) for i, k in enumerate(k_range)]


def write_pca_table(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("components,accuracy,sd\n")
        for k, mean, sd in rows:
            fh.write(f"{k},{100 * mean:.2f},{sd:.3f}\n")


def read_pca_table(path) -> list[tuple[int, float, float]]:
    with open(path, encoding="utf-8") as fh:
        next(fh)
        return [(int(a), float(b), float(c)) for a, b, c in
                (line.strip().split(",") for line in fh if line.strip())]
