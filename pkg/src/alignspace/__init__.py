"""Depth-dynamics embeddings, brain-referenced alignment, and consistency stats."""

from .consistency import ModalityGroup, SnciMap, snci_map, zscore_across_rois
from .depth_dynamics import (
    DmdSpectrum,
    EmbeddingTrajectory,
    SnapshotPair,
    StableRepresentation,
    analyze_trajectory,
    build_snapshots,
    fit_dmd,
    select_stable_mode,
    stable_representation,
    trajectory_to_z,
)
from .encoding import (
    AlignmentVector,
    EncodingConfig,
    RoiTimeSeries,
    alignment_vector,
    cv_alignment,
    cv_alignment_score,
    fit_ridge,
)
from .geometry_stats import (
    AnovaTable,
    DistanceMatrix,
    PcaEmbedding,
    PermanovaResult,
    SilhouetteResult,
    aggregate_networks,
    cosine_distance_matrix,
    distance_contrast,
    distance_matrix,
    pca_embed,
    permanova,
    silhouette,
    two_way_anova,
)
from .hemodynamics import (
    FeatureSeries,
    HrfParams,
    align_to_volumes,
    canonical_hrf,
    convolve_hrf,
    resample_kernel_to_tr,
)
from .pipeline import RunOptions, RunReport, run_pipeline
from .tensor_store import (
    AtlasTable,
    Manifest,
    TensorFile,
    load_atlas,
    load_manifest,
    load_tensor,
    read_array,
    read_tensor,
    write_array,
    write_tensor,
)

__version__ = "0.1.0"
