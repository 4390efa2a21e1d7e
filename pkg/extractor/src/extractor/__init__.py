"""Layer-trajectory extraction from frozen encoders into NFT1 tensors."""

from .jobs import ExtractionJob, ExtractionResult, JobError, extract_trajectories

__version__ = "0.1.0"
