"""ROI-level ridge encoding models and cross-validated alignment scores.

Each ROI gets an independent linear model from feature series to its BOLD
trace.  Scores are squared Pearson correlations between held-out
predictions and the observed series, with regularization strength chosen
per outer fold by nested block cross-validation.  Folds are contiguous
temporal blocks (BOLD autocorrelation makes shuffled folds leak), and
feature standardization always uses training-block statistics only.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyWarning, RankDeficiencyWarning, ValidationError
from .hemodynamics import FeatureSeries
from ._util import require_finite

DEFAULT_LAMBDA_GRID = tuple(float(10.0**e) for e in range(-3, 6))


@dataclass(frozen=True)
class RoiTimeSeries:
    """Parcel-averaged BOLD: Y is (R, T), one row per ROI."""

    tr: float
    Y: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 2:
            raise ValidationError(f"ROI series must be 2-D (R, T), got {Y.shape}")
        if self.tr <= 0:
            raise ValidationError(f"TR must be positive, got {self.tr}")
        require_finite(Y, "ROI time series")
        object.__setattr__(self, "Y", Y)

    @property
    def n_rois(self) -> int:
        return self.Y.shape[0]

    @property
    def n_volumes(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class EncodingConfig:
    cv_folds: int = 5
    ridge_lambdas: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    seed: int = 0
    n_jobs: int = 1


@dataclass(frozen=True)
class EncodingFit:
    """One outer fold's fitted map from raw features to prediction."""

    roi_index: int
    fold: int
    weights: np.ndarray
    intercept: float
    ridge_lambda: float
    fold_assignment: np.ndarray
    skipped: bool = False


@dataclass(frozen=True)
class CvAlignment:
    """Out-of-fold alignment score plus per-fold fit records."""

    score: float
    degenerate: bool
    fold_fits: tuple[EncodingFit, ...]
    fold_assignment: np.ndarray


@dataclass(frozen=True)
class AlignmentVector:
    """Per-ROI squared-correlation scores; one model's coordinates."""

    model_id: str
    modality: str
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 1:
            raise ValidationError("alignment scores must be 1-D")
        if np.any((scores < 0) | (scores > 1)):
            raise ValidationError("alignment scores must lie in [0, 1]")
        object.__setattr__(self, "scores", scores)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float):
    """Ridge fit with an unpenalized intercept, solved via SVD.

    Minimizes ||y - Xw - b|| ** 2 + lam * ||w|| ** 2 after centering both
    sides; lam = 0 on a rank-deficient design returns the minimum-norm
    solution and emits RankDeficiencyWarning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"incompatible shapes X{X.shape}, y{y.shape}")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 samples")
    if lam < 0:
        raise ValidationError(f"ridge lambda must be >= 0, got {lam}")
    require_finite(X, "design matrix")
    require_finite(y, "response")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(Xc.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    if lam == 0.0:
        rank = int(np.count_nonzero(s > tol))
        if rank < X.shape[1]:
            warnings.warn(
                "rank-deficient design with lambda=0; returning minimum-norm fit",
                RankDeficiencyWarning,
                stacklevel=2,
            )
        shrink = np.zeros_like(s)
        nz = s > tol
        shrink[nz] = 1.0 / s[nz]
    else:
        shrink = s / (s**2 + lam)
    w = Vt.T @ (shrink * (U.T @ yc))
    b = float(y_mean - x_mean @ w)
    return w, b


def contiguous_folds(n_volumes: int, k: int) -> list[np.ndarray]:
    """Partition 0..T-1 into k contiguous blocks of near-equal length."""
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if n_volumes < 2 * k:
        raise ValidationError(f"need T >= 2k volumes, got T={n_volumes}, k={k}")
    return list(np.array_split(np.arange(n_volumes), k))


def squared_pearson(a: np.ndarray, b: np.ndarray) -> float:
    """corr(a, b) ** 2 with the convention 0 when either side is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"incompatible series shapes {a.shape}, {b.shape}")
    if a.size < 2:
        return 0.0
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.linalg.norm(ac)
    nb = np.linalg.norm(bc)
    if na == 0.0 or nb == 0.0:
        return 0.0
    r = float(ac @ bc) / (na * nb)
    r = min(1.0, max(-1.0, r))
    return r * r


def _standardizer(X_train: np.ndarray):
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def _select_lambda(
    X: np.ndarray, y: np.ndarray, train_blocks: list[np.ndarray], grid
) -> float:
    """Pick lambda by leave-one-block-out validation inside the training set.

    With a single training block it is split in half so selection still
    sees held-out data.  Ties prefer the larger (more conservative) lambda.
    """
    if len(train_blocks) >= 2:
        inner_blocks = train_blocks
    else:
        only = train_blocks[0]
        half = len(only) // 2
        inner_blocks = [only[:half], only[half:]]
    best_lam = None
    best_score = -np.inf
    for lam in grid:
        preds, obs = [], []
        for i, val_block in enumerate(inner_blocks):
            fit_idx = np.concatenate(
                [b for j, b in enumerate(inner_blocks) if j != i]
            )
            if np.ptp(y[fit_idx]) == 0.0:
                continue
            mean, std = _standardizer(X[fit_idx])
            w, b = fit_ridge((X[fit_idx] - mean) / std, y[fit_idx], lam)
            preds.append(((X[val_block] - mean) / std) @ w + b)
            obs.append(y[val_block])
        if not preds:
            continue
        score = squared_pearson(np.concatenate(preds), np.concatenate(obs))
        if score > best_score or (score == best_score and best_lam is not None and lam > best_lam):
            best_score = score
            best_lam = float(lam)
    if best_lam is None:
        best_lam = float(grid[len(grid) // 2])
    return best_lam


def cv_alignment(
    X: np.ndarray,
    y: np.ndarray,
    cv_folds: int = 5,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    roi_index: int = -1,
) -> CvAlignment:
    """Nested block-CV alignment with per-fold fit records.

    The partition into contiguous blocks is deterministic, so ``seed`` only
    labels the run; it is accepted for config plumbing.  Out-of-fold
    predictions are concatenated in time order; the score is their squared
    Pearson correlation with the observed series.  Folds whose training
    response is constant are skipped with a warning; if all folds are
    skipped the score is 0 and the result is flagged degenerate.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"incompatible shapes X{X.shape}, y{y.shape}")
    grid = tuple(float(l) for l in lambda_grid)
    if not grid:
        raise ValidationError("empty ridge lambda grid")
    blocks = contiguous_folds(X.shape[0], cv_folds)
    assignment = np.empty(X.shape[0], dtype=int)
    for f, block in enumerate(blocks):
        assignment[block] = f

    fits = []
    pred = np.full(X.shape[0], np.nan)
    used = np.zeros(X.shape[0], dtype=bool)
    for f, test_block in enumerate(blocks):
        train_blocks = [b for j, b in enumerate(blocks) if j != f]
        train_idx = np.concatenate(train_blocks)
        if np.ptp(y[train_idx]) == 0.0:
            warnings.warn(
                f"fold {f}: constant training response, fold skipped",
                DegeneracyWarning,
                stacklevel=2,
            )
            fits.append(
                EncodingFit(
                    roi_index=roi_index,
                    fold=f,
                    weights=np.zeros(X.shape[1]),
                    intercept=float(y[train_idx][0]),
                    ridge_lambda=float("nan"),
                    fold_assignment=assignment,
                    skipped=True,
                )
            )
            continue
        lam = _select_lambda(X, y, train_blocks, grid)
        mean, std = _standardizer(X[train_idx])
        w_std, b_std = fit_ridge((X[train_idx] - mean) / std, y[train_idx], lam)
        # Fold the standardization into raw-feature weights.
        w = w_std / std
        b = float(b_std - mean @ w)
        pred[test_block] = X[test_block] @ w + b
        used[test_block] = True
        fits.append(
            EncodingFit(
                roi_index=roi_index,
                fold=f,
                weights=w,
                intercept=b,
                ridge_lambda=lam,
                fold_assignment=assignment,
            )
        )

    degenerate = not used.any()
    if degenerate:
        warnings.warn(
            "all folds degenerate; alignment score set to 0",
            DegeneracyWarning,
            stacklevel=2,
        )
        score = 0.0
    else:
        score = squared_pearson(pred[used], y[used])
    return CvAlignment(
        score=score,
        degenerate=degenerate,
        fold_fits=tuple(fits),
        fold_assignment=assignment,
    )


def cv_alignment_score(
    X: np.ndarray,
    y: np.ndarray,
    cv_folds: int = 5,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    seed: int = 0,
) -> float:
    """Held-out squared correlation in [0, 1] (see cv_alignment)."""
    return cv_alignment(X, y, cv_folds, lambda_grid, seed).score


def alignment_vector(
    features: FeatureSeries,
    brain: RoiTimeSeries,
    cfg: EncodingConfig = EncodingConfig(),
    model_id: str = "",
    modality: str = "",
) -> AlignmentVector:
    """Score every ROI independently and assemble scores in ROI order.

    ROIs are independent work units; with cfg.n_jobs > 1 they are scored in
    a thread pool, with results identical to sequential execution.
    """
    if not features.convolved:
        raise ValidationError("features must be convolved before encoding")
    if features.n_volumes != brain.n_volumes:
        raise ValidationError(
            f"feature volumes {features.n_volumes} != brain volumes {brain.n_volumes}"
        )

    def score_roi(r: int) -> float:
        return cv_alignment(
            features.Z,
            brain.Y[r],
            cfg.cv_folds,
            cfg.ridge_lambdas,
            cfg.seed,
            roi_index=r,
        ).score

    rois = range(brain.n_rois)
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            scores = list(pool.map(score_roi, rois))
    else:
        scores = [score_roi(r) for r in rois]
    return AlignmentVector(model_id=model_id, modality=modality, scores=np.array(scores))
