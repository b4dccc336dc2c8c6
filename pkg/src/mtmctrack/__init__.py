"""Multi-target, multi-camera tracking by detection association and
hierarchical clustering, with a synthetic scenario generator and identity
metrics for verification."""

from .model import (
    BoundingBox,
    Detection,
    IdentityCluster,
    PipelineConfig,
    Trajectory,
    TrajectoryEntry,
    validate_config,
)

__all__ = [
    "BoundingBox",
    "Detection",
    "IdentityCluster",
    "PipelineConfig",
    "Trajectory",
    "TrajectoryEntry",
    "validate_config",
]
