"""Depth-wise linear dynamics of layer embeddings.

A layer trajectory x_1..x_L is treated as one step of a discrete dynamical
system across network depth.  Two depth-shifted snapshot matrices are
centered by the cross-layer mean of the first L-1 layers, a reduced-order
linear operator is fit in the truncated SVD basis of the first snapshot,
and the operator's eigenvalue closest to unit magnitude picks the most
depth-persistent mode.  Projecting the depth-averaged embedding onto that
mode (and restoring the mean) condenses the whole trajectory to a single
stable vector z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import require_finite
from .errors import DegenerateTrajectory, ValidationError, ZeroDynamics

DEFAULT_SVD_REL_TOL = 1e-10

# Absolute floor (scaled by snapshot norm) below which centered snapshots
# count as zero dynamics.
_ZERO_FLOOR = 1e-14

# Eigenvalue-selection ties are resolved within this absolute slack so that
# mathematically tied magnitudes (e.g. 0.9 vs 1.1) tie in floating point too.
_TIE_TOL = 1e-12

# Below this norm the real part of a complex mode is considered empty and
# the imaginary part is used instead.
_REAL_PART_FLOOR = 1e-10


@dataclass(frozen=True)
class EmbeddingTrajectory:
    """Ordered layer embeddings for one stimulus of one model.

    ``layers`` is an (L, D) array, row ``l`` holding the embedding after
    layer ``l``.  Requires L >= 2 and finite entries.
    """

    stimulus_id: str
    layers: np.ndarray

    def __post_init__(self):
        layers = np.asarray(self.layers, dtype=float)
        if layers.ndim != 2:
            raise ValidationError(
                f"trajectory {self.stimulus_id!r}: layers must be 2-D (L, D), "
                f"got shape {layers.shape}"
            )
        if layers.shape[0] < 2:
            raise ValidationError(
                f"trajectory {self.stimulus_id!r}: need at least 2 layers"
            )
        require_finite(layers, f"trajectory {self.stimulus_id!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def n_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def dim(self) -> int:
        return self.layers.shape[1]


@dataclass(frozen=True)
class SnapshotPair:
    """Depth-shifted snapshots and their centered forms.

    X1 holds layers 1..L-1 as columns, X2 layers 2..L; ``mu`` is the
    column mean of X1 and both centered matrices subtract that same mean.
    """

    X1: np.ndarray
    X2: np.ndarray
    mu: np.ndarray
    X1c: np.ndarray
    X2c: np.ndarray


@dataclass(frozen=True)
class DmdSpectrum:
    """Reduced-order operator and its eigen-structure.

    ``modes`` is a (D, rank) complex array whose columns are the lifted
    modes U @ w_i, each normalized to unit norm with the phase rotated so
    its largest-magnitude entry is real and positive (determinism).
    """

    rank: int
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    A_tilde: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray


@dataclass(frozen=True)
class StableRepresentation:
    """Depth-averaged embedding projected onto the selected stable mode."""

    x_bar: np.ndarray
    stable_mode: np.ndarray
    stable_eigenvalue: complex
    z: np.ndarray


@dataclass(frozen=True)
class TrajectoryReport:
    """Diagnostics for one trajectory: outcome plus spectrum summary."""

    stimulus_id: str
    status: str  # "ok", "short", or "static"
    z: np.ndarray
    rank: int = 0
    eigenvalues: tuple[complex, ...] = ()
    selected_index: int = -1
    stable_eigenvalue: complex | None = None


def build_snapshots(traj: EmbeddingTrajectory) -> SnapshotPair:
    """Build the shifted snapshot matrices and center them.

    Needs L >= 3 so the operator fit sees at least two columns; shorter
    trajectories raise DegenerateTrajectory and callers fall back to the
    depth average.
    """
    if traj.n_layers < 3:
        raise DegenerateTrajectory(
            f"trajectory {traj.stimulus_id!r}: L={traj.n_layers} < 3"
        )
    X = traj.layers.T  # (D, L)
    X1 = X[:, :-1].copy()
    X2 = X[:, 1:].copy()
    mu = X1.mean(axis=1)
    X1c = X1 - mu[:, None]
    X2c = X2 - mu[:, None]
    return SnapshotPair(X1=X1, X2=X2, mu=mu, X1c=X1c, X2c=X2c)


def _canonical_phase(mode: np.ndarray) -> np.ndarray:
    """Rotate a complex mode so its largest-|entry| is real positive."""
    j = int(np.argmax(np.abs(mode)))
    pivot = mode[j]
    mag = abs(pivot)
    if mag == 0.0:
        return mode
    return mode * (pivot.conjugate() / mag)


def fit_dmd(snap: SnapshotPair, svd_rel_tol: float = DEFAULT_SVD_REL_TOL) -> DmdSpectrum:
    """Fit the reduced-order operator from centered snapshots.

    The SVD of the centered first snapshot is truncated at singular values
    >= svd_rel_tol * sigma_1, the operator U^T X2c V Sigma^-1 is formed in
    the reduced basis, and its eigenvectors are lifted back through U and
    unit-normalized.  Raises ZeroDynamics when the centered snapshot is
    numerically zero (constant trajectory).
    """
    if not 0.0 < svd_rel_tol < 1.0:
        raise ValidationError(f"svd_rel_tol must lie in (0, 1), got {svd_rel_tol}")
    if snap.X1c.shape != snap.X2c.shape:
        raise ValidationError(
            f"snapshot shapes differ: {snap.X1c.shape} vs {snap.X2c.shape}"
        )
    U, s, Vt = np.linalg.svd(snap.X1c, full_matrices=False)
    floor = _ZERO_FLOOR * max(1.0, float(np.linalg.norm(snap.X1)))
    if s.size == 0 or s[0] < floor:
        raise ZeroDynamics("centered snapshots are numerically zero")
    rank = int(np.count_nonzero(s >= svd_rel_tol * s[0]))
    U = U[:, :rank]
    s = s[:rank]
    V = Vt[:rank].T
    A_tilde = (U.T @ snap.X2c @ V) / s[None, :]
    eigenvalues, W = np.linalg.eig(A_tilde)
    modes = U @ W
    norms = np.linalg.norm(modes, axis=0)
    modes = modes / norms[None, :]
    for i in range(modes.shape[1]):
        modes[:, i] = _canonical_phase(modes[:, i])
    return DmdSpectrum(
        rank=rank,
        U=U,
        sigma=s,
        V=V,
        A_tilde=A_tilde,
        eigenvalues=eigenvalues,
        modes=modes,
    )


def select_stable_mode(spec: DmdSpectrum) -> tuple[complex, np.ndarray]:
    """Pick the eigenvalue with magnitude closest to 1 and realify its mode.

    Ties (within a tiny absolute slack) prefer the larger magnitude, then a
    nonnegative imaginary part.  A complex mode is reduced to its real part
    and renormalized; if the real part is numerically empty the imaginary
    part is used instead.
    """
    if spec.rank < 1:
        raise ValidationError("spectrum is empty")
    mags = np.abs(spec.eigenvalues)
    dist = np.abs(mags - 1.0)
    candidates = np.flatnonzero(dist <= dist.min() + _TIE_TOL)
    if candidates.size > 1:
        best_mag = mags[candidates].max()
        candidates = candidates[mags[candidates] >= best_mag - _TIE_TOL]
    if candidates.size > 1:
        nonneg = candidates[spec.eigenvalues[candidates].imag >= 0.0]
        if nonneg.size:
            candidates = nonneg
    idx = int(candidates[0])
    lam = complex(spec.eigenvalues[idx])
    mode = spec.modes[:, idx]
    real = mode.real
    norm = np.linalg.norm(real)
    if norm < _REAL_PART_FLOOR:
        real = mode.imag
        norm = np.linalg.norm(real)
    phi = real / norm
    return lam, phi


def stable_representation(
    traj: EmbeddingTrajectory,
    phi_s: np.ndarray,
    mu: np.ndarray,
    stable_eigenvalue: complex = complex(1.0),
) -> StableRepresentation:
    """Project the depth average onto the stable direction and restore the mean.

    z = (phi.x_bar / ||phi||^2) phi + mu, where x_bar averages all L layers
    while mu is the snapshot mean over the first L-1 (the two differ by
    construction).
    """
    phi_s = np.asarray(phi_s, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if phi_s.shape != (traj.dim,) or mu.shape != (traj.dim,):
        raise ValidationError(
            f"mode/mean dims {phi_s.shape}/{mu.shape} do not match trajectory D={traj.dim}"
        )
    nrm = np.linalg.norm(phi_s)
    if abs(nrm - 1.0) > 1e-9:
        raise ValidationError(f"stable mode must be unit norm, got {nrm}")
    x_bar = traj.layers.mean(axis=0)
    coef = float(phi_s @ x_bar) / float(phi_s @ phi_s)
    z = coef * phi_s + mu
    return StableRepresentation(
        x_bar=x_bar, stable_mode=phi_s, stable_eigenvalue=stable_eigenvalue, z=z
    )


def analyze_trajectory(
    traj: EmbeddingTrajectory, svd_rel_tol: float = DEFAULT_SVD_REL_TOL
) -> TrajectoryReport:
    """Run the full snapshot -> fit -> select -> project chain with fallbacks.

    Degenerate inputs (L < 3 or constant trajectories) never abort: they
    fall back to z = depth average and are labelled in the report status.
    """
    x_bar = traj.layers.mean(axis=0)
    try:
        snap = build_snapshots(traj)
    except DegenerateTrajectory:
        return TrajectoryReport(traj.stimulus_id, "short", z=x_bar)
    try:
        spec = fit_dmd(snap, svd_rel_tol)
    except ZeroDynamics:
        return TrajectoryReport(traj.stimulus_id, "static", z=x_bar)
    lam, phi = select_stable_mode(spec)
    idx = _selected_index(spec, lam)
    rep = stable_representation(traj, phi, snap.mu, stable_eigenvalue=lam)
    return TrajectoryReport(
        traj.stimulus_id,
        "ok",
        z=rep.z,
        rank=spec.rank,
        eigenvalues=tuple(complex(v) for v in spec.eigenvalues),
        selected_index=idx,
        stable_eigenvalue=lam,
    )


def _selected_index(spec: DmdSpectrum, lam: complex) -> int:
    matches = np.flatnonzero(spec.eigenvalues == lam)
    return int(matches[0]) if matches.size else -1


def trajectory_to_z(
    traj: EmbeddingTrajectory, svd_rel_tol: float = DEFAULT_SVD_REL_TOL
) -> np.ndarray:
    """Stable vector z for one trajectory (with documented fallbacks)."""
    return analyze_trajectory(traj, svd_rel_tol).z
