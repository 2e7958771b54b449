"""Gradient-boosted decision trees for binary classification.

A small second-order boosting implementation with logistic loss, exact greedy
split search over stored (nonzero) values and a learned default direction for
missing entries. Only the seven knobs the genetic search tunes are exposed,
plus the fixed seed, L2 leaf regularisation and base score.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from gaboost import _tree_kernels as _k

DEFAULT_SEED = 723


class GbtError(ValueError):
    pass


@dataclass(frozen=True)
class BoosterParams:
    learning_rate: float = 0.3
    n_estimators: int = 100
    max_depth: int = 6
    min_child_weight: float = 1.0
    gamma: float = 0.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    seed: int = DEFAULT_SEED
    reg_lambda: float = 1.0
    base_score: float | None = None  # None: log-odds of the training prior

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise GbtError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 0:
            raise GbtError(f"n_estimators must be a non-negative integer, got {self.n_estimators}")
        if int(self.max_depth) != self.max_depth or not 1 <= self.max_depth <= 20:
            raise GbtError(f"max_depth must be an integer in [1, 20], got {self.max_depth}")
        if self.min_child_weight < 0 or self.gamma < 0 or self.reg_lambda < 0:
            raise GbtError("min_child_weight, gamma and reg_lambda must be >= 0")
        for name in ("subsample", "colsample_bytree"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise GbtError(f"{name} must be in (0, 1], got {v}")
        object.__setattr__(self, "n_estimators", int(self.n_estimators))
        object.__setattr__(self, "max_depth", int(self.max_depth))

    @classmethod
    def from_dict(cls, d: dict) -> "BoosterParams":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array form of one regression tree; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def _d(nd):
            if self.feature[nd] < 0:
                return 0
            return 1 + max(_d(self.left[nd]), _d(self.right[nd]))
        return _d(0)

    def leaf_index(self, X) -> np.ndarray:
        """Leaf node id reached by each row of ``X``."""
        Xr = _as_csr(X)
        out = np.empty(Xr.shape[0], dtype=np.int64)
        for i in range(Xr.shape[0]):
            lo, hi = Xr.indptr[i], Xr.indptr[i + 1]
            row = dict(zip(Xr.indices[lo:hi].tolist(), Xr.data[lo:hi].tolist()))
            nd = 0
            while self.feature[nd] >= 0:
                v = row.get(int(self.feature[nd]), 0.0)
                if v == 0.0:
                    nd = self.left[nd] if self.default_left[nd] else self.right[nd]
                else:
                    nd = self.left[nd] if v < self.threshold[nd] else self.right[nd]
            out[i] = nd
        return out

    def to_dict(self, nd: int = 0) -> dict:
        # pre-order nesting
        if self.feature[nd] < 0:
            return {"leaf": float(self.value[nd])}
        return {
            "split": int(self.feature[nd]),
            "threshold": float(self.threshold[nd]),
            "default_left": bool(self.default_left[nd]),
            "left": self.to_dict(int(self.left[nd])),
            "right": self.to_dict(int(self.right[nd])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        feature, threshold, dleft, left, right, value = [], [], [], [], [], []

        def visit(node):
            nd = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            dleft.append(False)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in node:
                value[nd] = float(node["leaf"])
                return nd
            feature[nd] = int(node["split"])
            threshold[nd] = float(node["threshold"])
            dleft[nd] = bool(node["default_left"])
            left[nd] = visit(node["left"])
            right[nd] = visit(node["right"])
            return nd

        visit(d)
        return cls(
            np.asarray(feature, np.int64), np.asarray(threshold, np.float64),
            np.asarray(dleft, np.bool_), np.asarray(left, np.int64),
            np.asarray(right, np.int64), np.asarray(value, np.float64),
        )


@dataclass(frozen=True, eq=False)
class GbtModel:
    trees: list[Tree]
    base_score: float
    params: BoosterParams
    feature_count: int
    train_loss: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "params": self.params.to_dict(),
            "base_score": self.base_score,
            "feature_count": self.feature_count,
            "trees": [t.to_dict() for t in self.trees],
        }
        # repr-based float output round-trips bit-exactly
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            base_score=float(doc["base_score"]),
            params=BoosterParams.from_dict(doc["params"]),
            feature_count=int(doc["feature_count"]),
        )


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def logistic_grad_hess(p, y):
    """Gradient and hessian of the log loss with respect to the margin."""
    p = np.asarray(p, dtype=np.float64)
    g = p - y
    h = p * (1.0 - p)
    if g.ndim == 0:
        return float(g), float(h)
    return g, h


def split_gain(gl, hl, gr, hr, reg_lambda=1.0, gamma=0.0):
    """Loss reduction of splitting a node into (GL, HL) / (GR, HR)."""
    return 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda)
                  - (gl + gr) ** 2 / (hl + hr + reg_lambda)) - gamma


def logloss(y, p) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-15, 1 - 1e-15)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _as_csr(X) -> sp.csr_matrix:
    if sp.issparse(X):
        Xr = sp.csr_matrix(X, dtype=np.float64, copy=True)
    else:
        Xr = sp.csr_matrix(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    Xr.eliminate_zeros()
    Xr.sort_indices()
    return Xr


def _value_sorted_csc(Xr: sp.csr_matrix):
    Xc = Xr.tocsc()
    Xc.sort_indices()
    col_ptr = Xc.indptr.astype(np.int64)
    rows = Xc.indices.astype(np.int64)
    vals = Xc.data.astype(np.float64)
    col_of = np.repeat(np.arange(Xc.shape[1]), np.diff(col_ptr))
    # stable: equal values keep row order
    order = np.lexsort((rows, vals, col_of))
    return col_ptr, rows[order].copy(), vals[order].copy()


def _tree_sample(params: BoosterParams, t: int, n_rows: int, n_cols: int):
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, t]))
    node_of_row = np.full(n_rows, -1, dtype=np.int64)
    m = n_rows if params.subsample >= 1.0 else max(1, int(round(params.subsample * n_rows)))
    if m >= n_rows:
        node_of_row[:] = 0
    else:
        node_of_row[rng.choice(n_rows, size=m, replace=False)] = 0
    feat_mask = np.zeros(n_cols, dtype=np.bool_)
    mc = n_cols if params.colsample_bytree >= 1.0 else max(1, int(round(params.colsample_bytree * n_cols)))
    if mc >= n_cols:
        feat_mask[:] = True
    else:
        feat_mask[rng.choice(n_cols, size=mc, replace=False)] = True
    return node_of_row, feat_mask


def fit(X, y, params: BoosterParams | None = None, track_loss: bool = False) -> GbtModel:
    """Fit ``params.n_estimators`` trees sequentially on (X, y).

    ``X`` may be a dense array or any scipy sparse matrix. Stored zeros are
    treated as missing. Deterministic given (X, y, params).
    """
    params = params or BoosterParams()
    y = np.asarray(y, dtype=np.float64).ravel()
    Xr = _as_csr(X)
    n_rows, n_cols = Xr.shape
    if n_rows == 0 or n_cols == 0:
        raise GbtError("cannot fit on an empty matrix")
    if n_rows != len(y):
        raise GbtError(f"X has {n_rows} rows but y has {len(y)} labels")
    if not np.all((y == 0) | (y == 1)):
        raise GbtError("labels must be 0/1")
    prior = y.mean()
    if prior == 0.0 or prior == 1.0:
        raise GbtError("training labels contain a single class")

    base = params.base_score if params.base_score is not None else math.log(prior / (1 - prior))
    col_ptr, col_rows, col_vals = _value_sorted_csc(Xr)
    margin = np.full(n_rows, base)
    trees: list[Tree] = []
    losses: list[float] = []
    if track_loss:
        losses.append(logloss(y, sigmoid(margin)))
    for t in range(params.n_estimators):
        p = sigmoid(margin)
        g, h = logistic_grad_hess(p, y)
        node_of_row, feat_mask = _tree_sample(params, t, n_rows, n_cols)
        arrays = _k.grow_tree(col_ptr, col_rows, col_vals, g, h, node_of_row, feat_mask,
                              params.max_depth, float(params.min_child_weight),
                              float(params.gamma), float(params.reg_lambda))
        tree = Tree(*arrays)
        trees.append(tree)
        _k.tree_outputs(Xr.indptr.astype(np.int64), Xr.indices.astype(np.int64), Xr.data,
                        tree.feature, tree.threshold, tree.default_left, tree.left,
                        tree.right, tree.value, margin, float(params.learning_rate))
        if track_loss:
            losses.append(logloss(y, sigmoid(margin)))
    return GbtModel(trees=trees, base_score=base, params=params,
                    feature_count=n_cols, train_loss=losses)


def decision_function(model: GbtModel, X) -> np.ndarray:
    Xr = _as_csr(X)
    if Xr.shape[1] != model.feature_count:
        raise GbtError(f"model expects {model.feature_count} columns, X has {Xr.shape[1]}")
    margin = np.full(Xr.shape[0], model.base_score)
    indptr = Xr.indptr.astype(np.int64)
    indices = Xr.indices.astype(np.int64)
    for tree in model.trees:
        _k.tree_outputs(indptr, indices, Xr.data, tree.feature, tree.threshold,
                        tree.default_left, tree.left, tree.right, tree.value,
                        margin, float(model.params.learning_rate))
    return margin


def predict_proba(model: GbtModel, X) -> np.ndarray:
    return sigmoid(decision_function(model, X))


def predict_label(model: GbtModel, X, threshold: float = 0.5) -> np.ndarray:
    """1 where the positive-class probability is >= ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise GbtError(f"threshold must lie in (0, 1), got {threshold}")
    return (predict_proba(model, X) >= threshold).astype(np.int64)
