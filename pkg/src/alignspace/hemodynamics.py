"""Canonical hemodynamic kernel and causal convolution of feature series.

The kernel is the usual difference of two gamma-density bumps (response
peak minus a scaled undershoot) sampled on a fine internal grid, then
peak-normalized.  Convolution happens on the volume grid: the fine kernel
is averaged within TR-wide bins and applied causally to each feature
dimension, truncated to the scan length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as gamma_dist

from ._util import require_finite
from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True)
class HrfParams:
    """Double-gamma kernel parameters (seconds, except the ratio)."""

    peak_delay: float = 6.0
    undershoot_delay: float = 16.0
    peak_dispersion: float = 1.0
    undershoot_dispersion: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0
    duration: float = 32.0
    dt: float = 0.1

    def __post_init__(self):
        positives = {
            "peak_delay": self.peak_delay,
            "undershoot_delay": self.undershoot_delay,
            "peak_dispersion": self.peak_dispersion,
            "undershoot_dispersion": self.undershoot_dispersion,
            "duration": self.duration,
            "dt": self.dt,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValidationError(f"HRF {name} must be positive, got {value}")
        if self.undershoot_ratio < 0:
            raise ValidationError(
                f"HRF undershoot_ratio must be >= 0, got {self.undershoot_ratio}"
            )
        if self.duration < self.undershoot_delay:
            raise ValidationError(
                "HRF duration must cover the undershoot delay "
                f"({self.duration} < {self.undershoot_delay})"
            )

    @classmethod
    def from_dict(cls, doc: dict) -> "HrfParams":
        return cls(**{k: float(v) for k, v in doc.items()})


@dataclass(frozen=True)
class FeatureSeries:
    """Feature vectors on the volume grid: Z is (T, D), one row per volume."""

    tr: float
    Z: np.ndarray
    convolved: bool = False

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2:
            raise ValidationError(f"feature series must be 2-D (T, D), got {Z.shape}")
        if Z.shape[0] < 2:
            raise ValidationError("feature series needs at least 2 volumes")
        if self.tr <= 0:
            raise ValidationError(f"TR must be positive, got {self.tr}")
        require_finite(Z, "feature series")
        object.__setattr__(self, "Z", Z)

    @property
    def n_volumes(self) -> int:
        return self.Z.shape[0]

    @property
    def dim(self) -> int:
        return self.Z.shape[1]


def canonical_hrf(p: HrfParams = HrfParams()) -> np.ndarray:
    """Sample the double-gamma kernel at step ``p.dt`` over [0, duration].

    Each bump is a gamma density with shape delay/dispersion and scale
    dispersion; the undershoot is subtracted with weight undershoot_ratio.
    The result is scaled so its positive peak equals 1.
    """
    t = np.arange(0.0, p.duration + 0.5 * p.dt, p.dt)
    peak = gamma_dist.pdf(
        t, p.peak_delay / p.peak_dispersion, scale=p.peak_dispersion
    )
    under = gamma_dist.pdf(
        t, p.undershoot_delay / p.undershoot_dispersion, scale=p.undershoot_dispersion
    )
    kernel = peak - p.undershoot_ratio * under
    top = kernel.max()
    if top <= 0:
        raise ConfigurationError("HRF kernel has no positive peak")
    return kernel / top


def resample_kernel_to_tr(kernel: np.ndarray, dt: float, tr: float) -> np.ndarray:
    """Average the fine-grid kernel within TR-wide bins.

    Bin j covers [j*TR, (j+1)*TR); a TR wider than the kernel support is a
    configuration error, not silent truncation.
    """
    duration = dt * len(kernel)
    n_bins = int(np.floor(duration / tr + 1e-12))
    if n_bins < 1:
        raise ConfigurationError(
            f"TR {tr} exceeds HRF kernel duration {duration:.3f}"
        )
    t = np.arange(len(kernel)) * dt
    bins = np.floor(t / tr + 1e-12).astype(int)
    out = np.zeros(n_bins)
    for j in range(n_bins):
        mask = bins == j
        out[j] = kernel[mask].mean()
    return out


def convolve_hrf(series: FeatureSeries, p: HrfParams = HrfParams()) -> FeatureSeries:
    """Causally convolve each feature dimension with the TR-binned kernel.

    Output keeps the first T volumes (no edge padding), so sample t depends
    only on inputs at volumes <= t.  Linear in the input by construction.
    """
    if series.convolved:
        raise ValidationError("feature series is already convolved")
    kernel = resample_kernel_to_tr(canonical_hrf(p), p.dt, series.tr)
    T, D = series.Z.shape
    out = np.empty_like(series.Z)
    for d in range(D):
        out[:, d] = np.convolve(series.Z[:, d], kernel)[:T]
    return FeatureSeries(tr=series.tr, Z=out, convolved=True)


def align_to_volumes(
    stimulus_onsets, z_vectors, tr: float, n_volumes: int
) -> FeatureSeries:
    """Sample-and-hold design: each volume takes the most recent stimulus z.

    Volume t (at time t*TR) holds the z of the latest onset at or before
    t*TR; volumes before the first onset are zero rows.  Onsets must be
    nondecreasing and inside [0, T*TR).
    """
    onsets = [float(o) for o in stimulus_onsets]
    if not onsets:
        raise ValidationError("empty stimulus design")
    if len(onsets) != len(z_vectors):
        raise ValidationError(
            f"{len(onsets)} onsets but {len(z_vectors)} z vectors"
        )
    if any(b < a for a, b in zip(onsets, onsets[1:])):
        raise ValidationError("stimulus onsets must be nondecreasing")
    scan_end = n_volumes * tr
    late = [o for o in onsets if not 0.0 <= o < scan_end]
    if late:
        raise ValidationError(
            f"onsets outside [0, {scan_end}): {late}"
        )
    zs = [np.asarray(z, dtype=float) for z in z_vectors]
    dim = zs[0].shape[0]
    if any(z.shape != (dim,) for z in zs):
        raise ValidationError("all z vectors must share one dimension")
    Z = np.zeros((n_volumes, dim))
    idx = -1
    for t in range(n_volumes):
        vol_time = t * tr
        while idx + 1 < len(onsets) and onsets[idx + 1] <= vol_time:
            idx += 1
        if idx >= 0:
            Z[t] = zs[idx]
    return FeatureSeries(tr=tr, Z=Z, convolved=False)
