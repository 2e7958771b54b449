"""Confusion-matrix metrics, ROC AUC, stratified folds and repeated cross-validation.

The positive class is 1 ("Spam"). Ratios whose denominator is zero are reported
as 0 and flagged instead of producing NaN.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from gaboost import gbt
from gaboost.stats import rank_with_ties

METRIC_NAMES = ("accuracy", "gmean", "auc", "tpr", "tnr", "ppv", "fpr", "f1", "npv")
TABLE_LABELS = {
    "accuracy": "Accuracy", "gmean": "GMean", "auc": "AUC", "tpr": "TPR", "tnr": "TNR",
    "ppv": "PPV", "fpr": "FPR", "f1": "F1", "npv": "NPV",
}


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    accuracy: float
    gmean: float
    tpr: float
    tnr: float
    ppv: float
    fpr: float
    f1: float
    npv: float
    auc: float | None = None
    # names of ratios that hit 0/0 (or a single-class AUC)
    undefined: tuple[str, ...] = ()

    @property
    def degenerate(self) -> bool:
        return bool(self.undefined)

    def as_dict(self) -> dict[str, float | None]:
        return {m: getattr(self, m) for m in METRIC_NAMES}


def _ratio(num: float, den: float, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64).ravel()
    p = np.asarray(y_pred, dtype=np.int64).ravel()
    if len(t) != len(p):
        raise EvaluationError(f"y_true has {len(t)} entries, y_pred {len(p)}")
    for name, arr in (("y_true", t), ("y_pred", p)):
        if not np.all((arr == 0) | (arr == 1)):
            raise EvaluationError(f"{name} must contain only 0 and 1")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def metrics(cm: ConfusionMatrix, auc_value: float | None = None) -> MetricsReport:
    und: list[str] = []
    tpr = _ratio(cm.tp, cm.tp + cm.fn, "tpr", und)
    tnr = _ratio(cm.tn, cm.fp + cm.tn, "tnr", und)
    ppv = _ratio(cm.tp, cm.tp + cm.fp, "ppv", und)
    fpr = _ratio(cm.fp, cm.fp + cm.tn, "fpr", und)
    npv = _ratio(cm.tn, cm.tn + cm.fn, "npv", und)
    f1 = _ratio(2 * tpr * ppv, tpr + ppv, "f1", und)
    acc = _ratio(cm.tp + cm.tn, cm.total, "accuracy", und)
    return MetricsReport(accuracy=acc, gmean=math.sqrt(tpr * tnr), tpr=tpr, tnr=tnr,
                         ppv=ppv, fpr=fpr, f1=f1, npv=npv, auc=auc_value,
                         undefined=tuple(und))


def swap_positive_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Metrics with the negative class ("Ham") treated as positive.

    Recall becomes TNR (= 1 - FPR), precision becomes NPV, and F1 is rebuilt from
    those two. Accuracy and GMean do not depend on which class is positive.
    """
    return metrics(ConfusionMatrix(tp=cm.tn, tn=cm.tp, fp=cm.fn, fn=cm.fp))


def swapped_from_report(r: MetricsReport) -> dict[str, float]:
    """Ham-positive precision/recall/F1/accuracy rebuilt from Spam-positive metrics."""
    recall, precision = r.tnr, r.npv
    f1 = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return {"precision": precision, "recall": recall, "accuracy": r.accuracy, "f1": f1}


def auc(y_true, scores) -> float:
    """Area under the ROC curve from the Mann-Whitney rank statistic (ties count 1/2)."""
    y = np.asarray(y_true, dtype=np.int64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if len(y) != len(s):
        raise EvaluationError(f"y_true has {len(y)} entries, scores {len(s)}")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs both classes present")
    ranks = rank_with_ties(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(y_true, scores) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) points for decreasing thresholds, one point per distinct score."""
    y = np.asarray(y_true, dtype=np.int64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / max(1, y.sum())]
    fpr = np.r_[0.0, fps / max(1, len(y) - y.sum())]
    return fpr, tpr


@dataclass(frozen=True)
class FoldPlan:
    repeat: int
    fold: int
    train: np.ndarray
    test: np.ndarray


def stratified_folds(labels, k: int, seed: int, repeat: int = 0) -> list[FoldPlan]:
    """Shuffle each class with ``seed`` and deal its members round-robin into k folds.

    The dealing position carries over from one class to the next, so fold sizes
    also differ by at most one.
    """
    if k < 2:
        raise EvaluationError(f"k must be >= 2, got {k}")
    y = np.asarray(labels).ravel()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0x5F0]))
    buckets: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            warnings.warn(f"class {cls!r} has {len(members)} members, fewer than k={k}",
                          stacklevel=2)
        members = members[rng.permutation(len(members))]
        for j, idx in enumerate(members):
            buckets[(offset + j) % k].append(int(idx))
        offset = (offset + len(members)) % k
    all_idx = np.arange(len(y))
    plans = []
    for f, b in enumerate(buckets):
        test = np.sort(np.asarray(b, dtype=np.int64))
        mask = np.ones(len(y), dtype=bool)
        mask[test] = False
        plans.append(FoldPlan(repeat, f, all_idx[mask], test))
    return plans


def stratified_split(labels, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One stratified train/test split; each class contributes round(share * n_c) test rows."""
    if not 0.0 < test_fraction < 1.0:
        raise EvaluationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    y = np.asarray(labels).ravel()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0x5F1]))
    test = []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1) if len(members) > 1 else 0
        test.extend(members[:n_test].tolist())
    test_idx = np.sort(np.asarray(test, dtype=np.int64))
    mask = np.ones(len(y), dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def describe(values: Sequence[float]) -> dict[str, float]:
    """mean, population SD, min, quartiles (linear interpolation) and max."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EvaluationError("describe() needs at least one value")
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    return {"mean": float(v.mean()), "sd": float(v.std()), "min": float(v.min()),
            "q25": float(q25), "median": float(q50), "q75": float(q75), "max": float(v.max())}


@dataclass
class FoldRecord:
    repeat: int
    fold: int
    report: MetricsReport
    cm: ConfusionMatrix


@dataclass
class CvSummary:
    records: list[FoldRecord]
    stats: dict[str, dict[str, float]] = field(default_factory=dict)
    flagged: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def from_records(cls, records: list[FoldRecord]) -> "CvSummary":
        records = sorted(records, key=lambda r: (r.repeat, r.fold))
        return cls(records, aggregate(records),
                   [(r.repeat, r.fold) for r in records if r.report.degenerate])

    def values(self, metric: str) -> np.ndarray:
        return np.asarray([_metric_value(r.report, metric) for r in self.records])

    def write_folds(self, path) -> None:
        write_fold_csv(self.records, path)

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("metric,min,avg,max,sd\n")
            for m in METRIC_NAMES:
                s = self.stats[m]
                fh.write(f"{TABLE_LABELS[m]},{s['min']:.6f},{s['avg']:.6f},{s['max']:.6f},{s['sd']:.6f}\n")


def _metric_value(r: MetricsReport, metric: str) -> float:
    v = getattr(r, metric)
    return 0.0 if v is None else float(v)


def aggregate(records) -> dict[str, dict[str, float]]:
    out = {}
    for m in METRIC_NAMES:
        v = np.asarray([_metric_value(r.report, m) for r in records], dtype=np.float64)
        out[m] = {"min": float(v.min()), "avg": float(v.mean()),
                  "max": float(v.max()), "sd": float(v.std())}
    return out


FOLD_COLUMNS = ("repeat", "fold") + METRIC_NAMES


def write_fold_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(FOLD_COLUMNS) + "\n")
        for r in records:
            vals = [f"{_metric_value(r.report, m):.10f}" for m in METRIC_NAMES]
            fh.write(",".join([str(r.repeat), str(r.fold)] + vals) + "\n")


def read_fold_csv(path) -> list[dict[str, float]]:
    """Rows of a per-fold CSV as dicts; ``repeat``/``fold`` are ints."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"repeat", "fold"} <= set(reader.fieldnames):
            raise EvaluationError(f"{path}: not a per-fold CSV (needs repeat, fold columns)")
        for row in reader:
            rec = {k: float(v) for k, v in row.items() if k not in ("repeat", "fold")}
            rec["repeat"] = int(row["repeat"])
            rec["fold"] = int(row["fold"])
            rows.append(rec)
    return rows


def evaluate_fold(X, y, plan: FoldPlan, params: gbt.BoosterParams,
                  transform=None) -> FoldRecord:
    """Fit on the plan's train rows, score its test rows.

    ``transform(X_train, X_test) -> (X_train', X_test')`` lets a caller fit a
    feature map (e.g. PCA) inside the fold.
    """
    Xtr, Xte = X[plan.train], X[plan.test]
    ytr, yte = y[plan.train], y[plan.test]
    if transform is not None:
        Xtr, Xte = transform(Xtr, Xte)
    try:
        model = gbt.fit(Xtr, ytr, params)
        proba = gbt.predict_proba(model, Xte)
    except gbt.GbtError as exc:
        warnings.warn(f"fold {plan.repeat}/{plan.fold}: {exc}; predicting the majority class",
                      stacklevel=2)
        proba = np.full(len(yte), float(np.mean(ytr) >= 0.5))
    pred = (proba >= 0.5).astype(np.int64)
    cm = confusion(yte, pred)
    try:
        auc_value = auc(yte, proba)
        rep = metrics(cm, auc_value)
    except EvaluationError:
        rep = metrics(cm, 0.0)
        rep.undefined = rep.undefined + ("auc",)
    return FoldRecord(plan.repeat, plan.fold, rep, cm)


def repeated_cv(X, y, params: gbt.BoosterParams, features=None, repeats: int = 50,
                k: int = 10, seed: int = 0, threads: int = 1, transform=None) -> CvSummary:
    """``repeats`` x ``k`` stratified CV; repeat r uses fold seed ``seed + r``.

    ``features`` restricts X to a column subset (e.g. a chromosome's feature
    genes). Results are keyed by (repeat, fold), so ``threads`` does not change
    the output.
    """
    import scipy.sparse as sp

    y = np.asarray(y, dtype=np.int64)
    X = sp.csr_matrix(X) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    if features is not None:
        features = np.asarray(features, dtype=np.int64)
        if features.size and (features.min() < 0 or features.max() >= X.shape[1]):
            raise EvaluationError(
                f"feature index out of range for a matrix with {X.shape[1]} columns")
        X = X[:, features]
    plans = [p for r in range(repeats) for p in stratified_folds(y, k, seed + r, repeat=r)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda p: evaluate_fold(X, y, p, params, transform), plans))
    else:
        records = [evaluate_fold(X, y, p, params, transform) for p in plans]
    return CvSummary.from_records(records)


def report_to_row(r: MetricsReport) -> dict:
    d = asdict(r)
    d.pop("undefined")
    return d
