"""Per-ROI consistency of alignment scores within a modality.

For each ROI the scores of all models in a modality are summarized by
their mean and population standard deviation; the ratio mean/(std + eps)
is squashed through a logistic sigmoid, giving a score in (0, 1) that is
high when alignment is strong *and* consistent across architectures.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyWarning, ValidationError
from ._util import require_finite

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class ModalityGroup:
    """Alignment scores of all models sharing one modality: C is (M, R)."""

    modality: str
    model_ids: tuple[str, ...]
    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2:
            raise ValidationError(f"score matrix must be 2-D (M, R), got {C.shape}")
        if C.shape[0] != len(self.model_ids):
            raise ValidationError(
                f"{len(self.model_ids)} model ids but {C.shape[0]} score rows"
            )
        if C.shape[0] < 1:
            raise ValidationError("modality group needs at least one model")
        require_finite(C, "alignment scores")
        if np.any((C < 0) | (C > 1)):
            raise ValidationError("alignment scores must lie in [0, 1]")
        object.__setattr__(self, "C", C)

    @property
    def n_models(self) -> int:
        return self.C.shape[0]

    @property
    def n_rois(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class SnciMap:
    """Per-ROI consistency index with its mean/std components."""

    modality: str
    mu: np.ndarray
    sigma: np.ndarray
    epsilon: float
    snci: np.ndarray


def logistic(x: np.ndarray) -> np.ndarray:
    """Standard logistic 1 / (1 + exp(-x)), overflow-safe for large |x|."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def snci_map(group: ModalityGroup, epsilon: float = DEFAULT_EPSILON) -> SnciMap:
    """Mean-over-std consistency per ROI, squashed to (0, 1).

    sigma uses the population convention (divisor M).  A single-model group
    is computed, not rejected: sigma is 0 everywhere and the index reduces
    to sigmoid(mu / eps), flagged with a warning.
    """
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    if group.n_models == 1:
        warnings.warn(
            f"modality {group.modality!r} has a single model; "
            "consistency reduces to sigmoid(mu/eps)",
            DegeneracyWarning,
            stacklevel=2,
        )
    mu = group.C.mean(axis=0)
    sigma = np.sqrt(np.mean((group.C - mu) ** 2, axis=0))
    snci = logistic(mu / (sigma + epsilon))
    return SnciMap(
        modality=group.modality, mu=mu, sigma=sigma, epsilon=float(epsilon), snci=snci
    )


def zscore_across_rois(values: np.ndarray) -> np.ndarray:
    """Standardize to mean 0, population std 1 across ROIs.

    Constant input maps to all zeros and emits a DegeneracyWarning.
    Requires at least 2 values.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValidationError("z-scoring needs a 1-D vector with >= 2 entries")
    require_finite(values, "z-score input")
    std = values.std()
    if std == 0.0:
        warnings.warn(
            "constant input to z-scoring; returning zeros",
            DegeneracyWarning,
            stacklevel=2,
        )
        return np.zeros_like(values)
    return (values - values.mean()) / std
