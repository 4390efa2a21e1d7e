import warnings

import numpy as np
import pytest

from alignspace.encoding import (
    AlignmentVector,
    EncodingConfig,
    RoiTimeSeries,
    alignment_vector,
    contiguous_folds,
    cv_alignment,
    cv_alignment_score,
    fit_ridge,
    squared_pearson,
)
from alignspace.errors import (
    DegeneracyWarning,
    RankDeficiencyWarning,
    ValidationError,
)
from alignspace.hemodynamics import FeatureSeries

from oracles import ridge_closed_form


# ------------------------------------------------------------- fit_ridge


def test_ridge_orthonormal_interpolates():
    rng = np.random.default_rng(0)
    T = 12
    Q, _ = np.linalg.qr(rng.standard_normal((T, T)))
    y = rng.standard_normal(T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        w, b = fit_ridge(Q, y, 0.0)
    resid = y - Q @ w - b
    assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(y)


def test_ridge_constant_response():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((20, 4))
    for lam in (0.0, 1.0, 100.0):
        w, b = fit_ridge(X, np.full(20, 3.25), lam)
        assert np.max(np.abs(w)) <= 1e-12
        assert b == pytest.approx(3.25, abs=1e-12)


def test_ridge_matches_closed_form_oracle():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((40, 10))
    y = rng.standard_normal(40)
    w, b = fit_ridge(X, y, 1.0)
    w_ref, b_ref = ridge_closed_form(X, y, 1.0)
    assert np.max(np.abs(w - w_ref)) <= 1e-8
    assert abs(b - b_ref) <= 1e-8


def test_ridge_rank_deficiency_warns_minimum_norm():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((15, 2))
    X = np.hstack([base, base[:, :1] + base[:, 1:]])  # rank 2, D = 3
    y = rng.standard_normal(15)
    with pytest.warns(RankDeficiencyWarning):
        w, _ = fit_ridge(X, y, 0.0)
    assert np.all(np.isfinite(w))


def test_ridge_input_validation():
    with pytest.raises(ValidationError):
        fit_ridge(np.zeros((3, 2)), np.zeros(4), 1.0)
    with pytest.raises(ValidationError):
        fit_ridge(np.zeros((3, 2)), np.zeros(3), -1.0)


# ------------------------------------------------------------ cv scoring


def test_noiseless_linear_map_recovered():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((100, 5))
    w = rng.standard_normal(5)
    c = cv_alignment_score(X, X @ w)
    assert c >= 0.99


def test_null_scores_are_small():
    hits = 0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        X = rng.standard_normal((100, 5))
        y = rng.standard_normal(100)
        if cv_alignment_score(X, y) < 0.1:
            hits += 1
    assert hits >= 95


def test_constant_response_scores_zero():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((50, 3))
    with pytest.warns(DegeneracyWarning):
        result = cv_alignment(X, np.ones(50))
    assert result.score == 0.0
    assert result.degenerate


def test_score_in_unit_interval():
    for i in range(10):
        rng = np.random.default_rng(2000 + i)
        X = rng.standard_normal((40, 3))
        y = rng.standard_normal(40) + 0.5 * X[:, 0]
        c = cv_alignment_score(X, y)
        assert 0.0 <= c <= 1.0


def test_score_affine_invariant_in_response():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((60, 4))
    y = X @ rng.standard_normal(4) + 0.3 * rng.standard_normal(60)
    c = cv_alignment_score(X, y)
    c_affine = cv_alignment_score(X, -2.5 * y + 7.0)
    assert abs(c - c_affine) <= 1e-10


def test_determinism_bitwise():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((50, 4))
    y = rng.standard_normal(50)
    a = cv_alignment_score(X, y, seed=5)
    b = cv_alignment_score(X, y, seed=5)
    assert a == b


def test_no_temporal_leakage():
    # Perturbing only a fold's own test block must not change that fold's fit.
    rng = np.random.default_rng(14)
    X = rng.standard_normal((50, 4))
    y = X @ rng.standard_normal(4) + rng.standard_normal(50)
    k = 5
    blocks = contiguous_folds(50, k)
    base = cv_alignment(X, y, cv_folds=k)
    for f in range(k):
        y2 = y.copy()
        y2[blocks[f]] += 100.0
        moved = cv_alignment(X, y2, cv_folds=k)
        assert np.array_equal(base.fold_fits[f].weights, moved.fold_fits[f].weights)
        assert base.fold_fits[f].intercept == moved.fold_fits[f].intercept
        assert base.fold_fits[f].ridge_lambda == moved.fold_fits[f].ridge_lambda


def test_fold_partition_contract():
    blocks = contiguous_folds(10, 5)
    assert [b.tolist() for b in blocks] == [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]
    with pytest.raises(ValidationError):
        contiguous_folds(9, 5)
    with pytest.raises(ValidationError):
        contiguous_folds(10, 1)


def test_lambda_comes_from_grid():
    rng = np.random.default_rng(15)
    X = rng.standard_normal((60, 3))
    y = X @ rng.standard_normal(3)
    grid = (0.01, 1.0, 100.0)
    result = cv_alignment(X, y, lambda_grid=grid)
    for fit in result.fold_fits:
        assert fit.ridge_lambda in grid


def test_empty_grid_rejected():
    with pytest.raises(ValidationError):
        cv_alignment_score(np.zeros((20, 2)), np.zeros(20), lambda_grid=())


def test_squared_pearson_conventions():
    a = np.array([1.0, 2.0, 3.0])
    assert squared_pearson(a, 2 * a + 1) == pytest.approx(1.0, abs=1e-12)
    assert squared_pearson(a, -a) == pytest.approx(1.0, abs=1e-12)
    assert squared_pearson(a, np.ones(3)) == 0.0


# ------------------------------------------------------- alignment_vector


def _features(Z, tr=1.0):
    return FeatureSeries(tr=tr, Z=Z, convolved=True)


def test_alignment_vector_signal_and_null_rois():
    rng = np.random.default_rng(20)
    Z = rng.standard_normal((100, 5))
    w = rng.standard_normal(5)
    Y = np.vstack([Z @ w, rng.standard_normal(100)])
    vec = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y), model_id="m")
    assert vec.scores[0] >= 0.99
    assert vec.scores[1] < 0.1


def test_alignment_vector_roi_permutation_equivariance():
    rng = np.random.default_rng(21)
    Z = rng.standard_normal((60, 4))
    Y = rng.standard_normal((5, 60))
    base = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y))
    perm = np.array([3, 0, 4, 1, 2])
    shuffled = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y[perm]))
    assert np.array_equal(shuffled.scores, base.scores[perm])


def test_alignment_vector_roi_independence():
    rng = np.random.default_rng(22)
    Z = rng.standard_normal((60, 4))
    Y = rng.standard_normal((4, 60))
    full = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y))
    dropped = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y[[0, 1, 3]]))
    assert np.array_equal(dropped.scores, full.scores[[0, 1, 3]])


def test_alignment_vector_parallel_equals_sequential():
    rng = np.random.default_rng(23)
    Z = rng.standard_normal((60, 4))
    Y = rng.standard_normal((6, 60))
    seq = alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=Y))
    par = alignment_vector(
        _features(Z), RoiTimeSeries(tr=1.0, Y=Y), EncodingConfig(n_jobs=4)
    )
    assert np.array_equal(seq.scores, par.scores)


def test_alignment_vector_requires_convolved_and_matching_t():
    Z = np.zeros((20, 2))
    with pytest.raises(ValidationError, match="convolved"):
        alignment_vector(
            FeatureSeries(tr=1.0, Z=Z, convolved=False),
            RoiTimeSeries(tr=1.0, Y=np.zeros((2, 20))),
        )
    with pytest.raises(ValidationError, match="volumes"):
        alignment_vector(_features(Z), RoiTimeSeries(tr=1.0, Y=np.zeros((2, 21))))


def test_alignment_vector_scores_validated():
    with pytest.raises(ValidationError):
        AlignmentVector(model_id="m", modality="vision", scores=np.array([1.5]))
