"""Geometry and inference over model alignment vectors.

Covers the population-level battery: pairwise cosine distances, PCA
embedding, permutation tests on a distance matrix (pseudo-F and mean
silhouette), network-level aggregation, and a two-way ANOVA with
interaction on unbalanced designs (Type II sums of squares).

Permutation p-values use the (1 + exceedances) / (1 + n_perm) convention
with ties counted as exceedances.  When the total number of label
permutations is small enough they are enumerated exhaustively (exact
test); otherwise sampled permutations that merely reproduce the observed
partition are redrawn, since the observed labeling already contributes
the +1 term.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import f as f_dist

from ._util import require_finite, substream
from .errors import DegeneracyWarning, EstimabilityError, ValidationError


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, zero-diagonal, nonnegative pairwise distances."""

    values: np.ndarray
    metric: str = "cosine"

    def __post_init__(self):
        V = np.asarray(self.values, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValidationError(f"distance matrix must be square, got {V.shape}")
        require_finite(V, "distance matrix")
        if np.abs(V - V.T).max(initial=0.0) > 1e-12:
            raise ValidationError("distance matrix must be symmetric")
        if np.abs(np.diag(V)).max(initial=0.0) != 0.0:
            raise ValidationError("distance matrix diagonal must be zero")
        if V.min(initial=0.0) < 0.0:
            raise ValidationError("distances must be nonnegative")
        object.__setattr__(self, "values", V)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PcaEmbedding:
    components: np.ndarray  # (k, R), rows orthonormal
    explained_variance_ratio: np.ndarray
    coordinates: np.ndarray  # (M, k)


@dataclass(frozen=True)
class PermanovaResult:
    pseudo_f: float
    p_value: float
    n_permutations: int
    seed: int
    exact: bool


@dataclass(frozen=True)
class SilhouetteResult:
    mean_silhouette: float
    per_sample: np.ndarray
    p_value: float
    n_permutations: int
    seed: int
    exact: bool


@dataclass(frozen=True)
class AnovaRow:
    term: str
    ss: float
    df: int
    f: float | None
    p: float | None


@dataclass(frozen=True)
class AnovaTable:
    factor_a: AnovaRow
    factor_b: AnovaRow
    interaction: AnovaRow
    residual: AnovaRow

    def rows(self) -> list[AnovaRow]:
        return [self.factor_a, self.factor_b, self.interaction, self.residual]


def cosine_distance_matrix(vectors) -> DistanceMatrix:
    """Pairwise 1 - cos similarity via the half-angle identity.

    Computing ||v_i/|v_i| - v_j/|v_j|||^2 / 2 keeps identical vectors at
    exactly 0 and bounds entries in [0, 2] without clipping tricks.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[0] < 2:
        raise ValidationError(f"need >= 2 vectors in a 2-D array, got {V.shape}")
    require_finite(V, "vectors")
    norms = np.linalg.norm(V, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"zero-norm vector at index {int(zero[0])}")
    unit = V / norms[:, None]
    diff = unit[:, None, :] - unit[None, :, :]
    D = 0.5 * np.einsum("ijk,ijk->ij", diff, diff)
    D = np.minimum(D, 2.0)
    return DistanceMatrix(values=D, metric="cosine")


def euclidean_distance_matrix(vectors) -> DistanceMatrix:
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[0] < 2:
        raise ValidationError(f"need >= 2 vectors in a 2-D array, got {V.shape}")
    require_finite(V, "vectors")
    diff = V[:, None, :] - V[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return DistanceMatrix(values=D, metric="euclidean")


def distance_matrix(vectors, metric: str = "cosine") -> DistanceMatrix:
    if metric == "cosine":
        return cosine_distance_matrix(vectors)
    if metric == "euclidean":
        return euclidean_distance_matrix(vectors)
    raise ValidationError(f"unknown metric {metric!r}")


def pca_embed(C: np.ndarray, k: int) -> PcaEmbedding:
    """Top-k principal directions of the column-mean-centered score matrix.

    Component signs are fixed by making each component's largest-magnitude
    loading positive, so repeated runs and reordered inputs agree.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] < 2:
        raise ValidationError(f"need a 2-D matrix with M >= 2 rows, got {C.shape}")
    require_finite(C, "score matrix")
    M, R = C.shape
    k_max = min(M - 1, R)
    if not 1 <= k <= k_max:
        raise ValidationError(f"k must lie in 1..{k_max}, got {k}")
    Cc = C - C.mean(axis=0)
    _, s, Vt = np.linalg.svd(Cc, full_matrices=False)
    total = float((s**2).sum())
    components = Vt[:k].copy()
    if total == 0.0:
        warnings.warn(
            "all rows coincide; PCA variance ratios set to zero",
            DegeneracyWarning,
            stacklevel=2,
        )
        ratios = np.zeros(k)
    else:
        ratios = s[:k] ** 2 / total
    for i in range(k):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    coords = Cc @ components.T
    return PcaEmbedding(
        components=components, explained_variance_ratio=ratios, coordinates=coords
    )


def _check_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    groups, counts = np.unique(labels, return_counts=True)
    if groups.size < 2:
        raise ValidationError("need at least 2 groups (one group equals the sample)")
    if counts.min() < 1:
        raise ValidationError("every group needs at least one member")
    return labels


def _partition_key(labels: np.ndarray) -> tuple:
    """Canonical form identifying the induced partition, ignoring names."""
    order = {}
    out = []
    for lab in labels.tolist():
        if lab not in order:
            order[lab] = len(order)
        out.append(order[lab])
    return tuple(out)


def _n_distinct_partitions(labels: np.ndarray) -> int:
    _, counts = np.unique(labels, return_counts=True)
    total = math.factorial(len(labels))
    for c in counts:
        total //= math.factorial(int(c))
    size_mult = {}
    for c in counts:
        size_mult[int(c)] = size_mult.get(int(c), 0) + 1
    for m in size_mult.values():
        total //= math.factorial(m)
    return total


def _permutation_pvalue(stat_fn, labels: np.ndarray, n_perm: int, seed: int):
    """Shared permutation engine; returns (observed, p, n_used, exact)."""
    if n_perm < 1:
        raise ValidationError(f"permutation count must be >= 1, got {n_perm}")
    n = len(labels)
    observed = stat_fn(labels)
    total = math.factorial(n)
    if total <= n_perm + 1:
        count = 0
        for perm in itertools.permutations(range(n)):
            if stat_fn(labels[list(perm)]) >= observed:
                count += 1
        return observed, count / total, total - 1, True
    if _n_distinct_partitions(labels) <= 1:
        # Statistic is constant under relabeling; nothing to test.
        warnings.warn(
            "all label permutations induce the same partition; p = 1",
            DegeneracyWarning,
            stacklevel=3,
        )
        return observed, 1.0, n_perm, False
    observed_key = _partition_key(labels)
    exceed = 0
    for i in range(n_perm):
        rng = substream(seed, "label-permutation", i)
        perm = rng.permutation(n)
        while _partition_key(labels[perm]) == observed_key:
            perm = rng.permutation(n)
        if stat_fn(labels[perm]) >= observed:
            exceed += 1
    return observed, (1 + exceed) / (1 + n_perm), n_perm, False


def _gower_center(sq_dist: np.ndarray) -> np.ndarray:
    n = sq_dist.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    return -0.5 * (J @ sq_dist @ J)


def _pseudo_f(G: np.ndarray, labels: np.ndarray) -> float:
    n = G.shape[0]
    groups = np.unique(labels)
    ss_total = float(np.trace(G))
    ss_between = 0.0
    for g in groups:
        idx = np.flatnonzero(labels == g)
        ss_between += float(G[np.ix_(idx, idx)].sum()) / idx.size
    ss_within = ss_total - ss_between
    df_between = groups.size - 1
    df_within = n - groups.size
    if df_within < 1:
        raise ValidationError("pseudo-F needs n > number of groups")
    num = ss_between / df_between
    den = ss_within / df_within
    if den <= 0.0:
        return 0.0 if num <= 0.0 else float("inf")
    return num / den


def permanova(
    D: DistanceMatrix, labels, n_perm: int = 999, seed: int = 0
) -> PermanovaResult:
    """Permutation test of group location on a distance matrix.

    The pseudo-F comes from the Gower-centered squared-distance
    decomposition; the permutation null redistributes labels over points.
    """
    labels = _check_labels(labels)
    if len(labels) != D.n:
        raise ValidationError(f"{len(labels)} labels for {D.n} points")
    G = _gower_center(D.values**2)
    observed, p, n_used, exact = _permutation_pvalue(
        lambda lab: _pseudo_f(G, lab), labels, n_perm, seed
    )
    return PermanovaResult(
        pseudo_f=float(observed),
        p_value=float(p),
        n_permutations=n_used,
        seed=seed,
        exact=exact,
    )


def _silhouette_samples(D: np.ndarray, labels: np.ndarray) -> np.ndarray:
    n = D.shape[0]
    groups = np.unique(labels)
    s = np.zeros(n)
    for i in range(n):
        own = labels[i]
        own_idx = np.flatnonzero(labels == own)
        if own_idx.size == 1:
            s[i] = 0.0  # singleton convention
            continue
        a = D[i, own_idx].sum() / (own_idx.size - 1)
        b = np.inf
        for g in groups:
            if g == own:
                continue
            other = np.flatnonzero(labels == g)
            b = min(b, D[i, other].mean())
        denom = max(a, b)
        s[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return s


def silhouette(
    D: DistanceMatrix, labels, n_perm: int = 999, seed: int = 0
) -> SilhouetteResult:
    """Mean silhouette with a permutation p-value (same engine as permanova)."""
    labels = _check_labels(labels)
    if len(labels) != D.n:
        raise ValidationError(f"{len(labels)} labels for {D.n} points")

    def stat(lab):
        return float(_silhouette_samples(D.values, lab).mean())

    observed, p, n_used, exact = _permutation_pvalue(stat, labels, n_perm, seed)
    per_sample = _silhouette_samples(D.values, labels)
    return SilhouetteResult(
        mean_silhouette=float(observed),
        per_sample=per_sample,
        p_value=float(p),
        n_permutations=n_used,
        seed=seed,
        exact=exact,
    )


def distance_contrast(D: DistanceMatrix, labels) -> tuple[float, float]:
    """Mean within-group and between-group distance over unordered pairs."""
    labels = _check_labels(labels)
    if len(labels) != D.n:
        raise ValidationError(f"{len(labels)} labels for {D.n} points")
    intra, inter = [], []
    for i in range(D.n):
        for j in range(i + 1, D.n):
            (intra if labels[i] == labels[j] else inter).append(D.values[i, j])
    if not intra or not inter:
        raise ValidationError("need both within-group and between-group pairs")
    return float(np.mean(intra)), float(np.mean(inter))


def aggregate_networks(values, networks) -> dict[str, float]:
    """Mean of per-ROI values within each network label.

    Networks with no ROI are simply absent from the result (never zero).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValidationError("values must be 1-D")
    networks = list(networks)
    if len(networks) != values.size:
        raise ValidationError(
            f"{values.size} values but {len(networks)} network assignments"
        )
    require_finite(values, "network aggregation input")
    out: dict[str, float] = {}
    for label in dict.fromkeys(networks):  # first-seen order, deterministic
        idx = [i for i, lab in enumerate(networks) if lab == label]
        out[label] = float(values[idx].mean())
    return out


def _effect_columns(labels: list, levels: list) -> np.ndarray:
    """Sum-to-zero (effect) coding: len(levels) - 1 columns."""
    n = len(labels)
    cols = np.zeros((n, len(levels) - 1))
    last = levels[-1]
    index = {lev: i for i, lev in enumerate(levels)}
    for row, lab in enumerate(labels):
        if lab == last:
            cols[row, :] = -1.0
        else:
            cols[row, index[lab]] = 1.0
    return cols


def _rss(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def two_way_anova(observations) -> AnovaTable:
    """Two-way ANOVA with interaction, Type II sums of squares.

    ``observations`` is an iterable of (value, factor_a, factor_b) triples.
    Each main effect is adjusted for the other; the interaction is adjusted
    for both mains.  Effect coding keeps the decomposition meaningful on
    unbalanced designs.  Every factor-level cell must be occupied, or the
    interaction is inestimable.
    """
    rows = list(observations)
    if not rows:
        raise ValidationError("no observations")
    y = np.array([float(r[0]) for r in rows])
    a_labels = [r[1] for r in rows]
    b_labels = [r[2] for r in rows]
    require_finite(y, "ANOVA response")
    levels_a = sorted(set(a_labels))
    levels_b = sorted(set(b_labels))
    if len(levels_a) < 2 or len(levels_b) < 2:
        raise ValidationError("each factor needs at least 2 levels")
    cells = {(a, b) for a, b in zip(a_labels, b_labels)}
    empty = [
        (a, b)
        for a in levels_a
        for b in levels_b
        if (a, b) not in cells
    ]
    if empty:
        raise EstimabilityError(
            f"interaction inestimable: empty cells {empty}"
        )
    n = y.size
    df_a = len(levels_a) - 1
    df_b = len(levels_b) - 1
    df_ab = df_a * df_b
    df_res = n - len(levels_a) * len(levels_b)
    if df_res < 1:
        raise ValidationError("residual degrees of freedom must be >= 1")

    A = _effect_columns(a_labels, levels_a)
    B = _effect_columns(b_labels, levels_b)
    AB = np.concatenate(
        [A[:, [i]] * B[:, [j]] for i in range(df_a) for j in range(df_b)], axis=1
    )
    one = np.ones((n, 1))

    rss_ab_full = _rss(np.hstack([one, A, B, AB]), y)
    rss_main = _rss(np.hstack([one, A, B]), y)
    rss_a_only = _rss(np.hstack([one, A]), y)
    rss_b_only = _rss(np.hstack([one, B]), y)

    ss_a = max(0.0, rss_b_only - rss_main)
    ss_b = max(0.0, rss_a_only - rss_main)
    ss_ab = max(0.0, rss_main - rss_ab_full)
    ss_res = rss_ab_full

    def row(term: str, ss: float, df: int) -> AnovaRow:
        if ss_res <= 0.0:
            f_val = float("inf") if ss > 0.0 else 0.0
            p_val = 0.0 if ss > 0.0 else 1.0
        else:
            f_val = (ss / df) / (ss_res / df_res)
            p_val = float(f_dist.sf(f_val, df, df_res))
        return AnovaRow(term=term, ss=ss, df=df, f=f_val, p=p_val)

    return AnovaTable(
        factor_a=row("modality", ss_a, df_a),
        factor_b=row("network", ss_b, df_b),
        interaction=row("modality:network", ss_ab, df_ab),
        residual=AnovaRow(term="residual", ss=ss_res, df=df_res, f=None, p=None),
    )
