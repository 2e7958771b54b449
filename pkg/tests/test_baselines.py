import numpy as np
import pytest
import scipy.sparse as sp

from gaboost import baselines, synthetic
from gaboost.baselines import BaselineError

import oracles


def test_chi2_examples():
    X = np.array([[1.0], [1.0], [0.0], [0.0]])
    assert baselines.chi2_scores(X, [1, 1, 0, 0]).tolist() == [2.0]
    assert baselines.chi2_scores(np.zeros((4, 1)), [1, 1, 0, 0]).tolist() == [0.0]
    assert baselines.chi2_scores(np.ones((4, 1)), [1, 1, 0, 0]).tolist() == [0.0]
    with pytest.raises(BaselineError):
        baselines.chi2_scores(-X, [1, 1, 0, 0])


def test_chi2_matches_two_loop_oracle_sparse_and_dense():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.random((50, 20)) * (rng.random((50, 20)) < 0.4)
        y = rng.integers(0, 2, 50)
        ref = oracles.chi2_two_loop(X, y)
        assert np.array_equal(baselines.chi2_scores(X, y), ref)
        assert np.array_equal(baselines.chi2_scores(sp.csr_matrix(X), y), ref)


def test_chi2_select():
    assert baselines.chi2_select([0, 5, 3], 2).tolist() == [1, 2]
    assert sorted(baselines.chi2_select([0, 5, 3], 3).tolist()) == [0, 1, 2]
    assert baselines.chi2_select([1, 2, 2, 1], 3).tolist() == [1, 2, 0]
    with pytest.raises(BaselineError):
        baselines.chi2_select([1, 2], 3)


def test_chi2_dump(tmp_path):
    ds, _ = synthetic.make_corpus(60, 10, 2, seed=1)
    s = baselines.chi2_scores(ds.matrix, ds.labels)
    baselines.write_chi2_dump(s, ds.vocabulary, tmp_path / "c.tsv", baselines.chi2_select(s, 3))
    lines = (tmp_path / "c.tsv").read_text().splitlines()
    assert len(lines) == 3
    idx, term, score = lines[0].split("\t")
    assert term == ds.vocabulary.term(int(idx)) and float(score) == pytest.approx(s.max())


def _close_up_to_sign(a, b, tol):
    return min(np.abs(a - b).max(), np.abs(a + b).max()) < tol


def test_pca_matches_jacobi_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        X = rng.normal(size=(10, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
        m = baselines.pca_fit(X, 3, seed=1)
        vals, vecs = oracles.jacobi_eigh(np.cov(X, rowvar=False))
        for c in range(3):
            assert _close_up_to_sign(m.components[c], vecs[:, c], 1e-6)
            assert m.explained_variance[c] == pytest.approx(vals[c], rel=1e-8)
        assert np.abs(m.components @ m.components.T - np.eye(3)).max() < 1e-8


def test_pca_variance_bookkeeping_and_sign():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 5))
    m = baselines.pca_fit(X, 5)
    assert m.explained_variance.sum() == pytest.approx(m.total_variance, abs=1e-8)
    assert m.total_variance == pytest.approx(np.var(X, axis=0, ddof=1).sum(), abs=1e-10)
    for v in m.components:
        assert v[np.argmax(np.abs(v))] > 0


def test_pca_rank_one_and_isotropic():
    t = np.linspace(-1, 1, 9)
    X = np.column_stack([t, 2 * t])
    m = baselines.pca_fit(X, 1)
    assert m.explained_variance[0] / m.total_variance == pytest.approx(1.0, abs=1e-12)
    Z = baselines.pca_transform(m, X)
    recon = Z @ m.components + m.mean
    assert np.abs(recon - X).max() < 1e-12

    # +-e_i rows: covariance is a multiple of the identity
    E = np.vstack([np.eye(5), -np.eye(5)])
    m = baselines.pca_fit(E, 1)
    vals, _ = oracles.jacobi_eigh(np.cov(E, rowvar=False))
    assert m.explained_variance[0] == pytest.approx(vals[0])
    assert m.explained_variance[0] / m.total_variance == pytest.approx(1 / 5)


def test_pca_transform_shapes_and_errors():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 4))
    m = baselines.pca_fit(X, 2)
    assert np.allclose(baselines.pca_transform(m, m.mean[None, :]), 0.0)
    assert baselines.pca_transform(m, X[0]).shape == (1, 2)
    with pytest.raises(BaselineError):
        baselines.pca_transform(m, X[:, :3])
    with pytest.raises(BaselineError):
        baselines.pca_fit(X, 5)


def test_pca_sparse_matches_dense():
    ds, _ = synthetic.make_corpus(40, 15, 3, seed=4)
    a = baselines.pca_fit(ds.matrix, 3)
    b = baselines.pca_fit(ds.matrix.toarray(), 3)
    for c in range(3):
        assert _close_up_to_sign(a.components[c], b.components[c], 1e-8)


def test_pca_sweep_rows_and_monotone_on_ordered_data(tmp_path):
    rng = np.random.default_rng(5)
    n = 200
    # y = (z0 > 0) and (z1 > 0) with a margin around zero; z0 and z1 have the two largest
    # variances, so PC1 alone resolves half the rule and PC1 + PC2 all of it
    z = rng.uniform(1, 3, size=(n, 2)) * rng.choice([-1, 1], size=(n, 2)) * np.array([4, 2])
    y = ((z[:, 0] > 0) & (z[:, 1] > 0)).astype(int)
    X = np.column_stack([z, rng.normal(scale=0.1, size=(n, 3))])
    rows = baselines.pca_sweep(X, y, [1, 2, 3], repeats=2, folds=5, seed=1)
    assert [r[0] for r in rows] == [1, 2, 3]
    acc = [r[1] for r in rows]
    # the fold-estimated rotation can tilt a boundary past a rare test point
    assert acc[0] < 0.9 and acc[1] >= 0.99 and acc[2] >= acc[1] - 0.005
    assert len(baselines.pca_sweep(X, y, [1], repeats=1, folds=2)) == 1
    baselines.write_pca_table([(20, 0.9153, 0.0104)], tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[1] == "20,91.53,0.010"
    assert baselines.read_pca_table(tmp_path / "p.csv") == [(20, 91.53, 0.010)]
