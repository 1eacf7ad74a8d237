from .core import (
    SegmenterConfig,
    SegmenterModel,
    argmax_labels,
    build_segmenter,
    model_from_checkpoint,
    segment,
    segment_scores,
    train_segmenter,
)
from .estimator import DeepLabSegmenter

__all__ = [
    "DeepLabSegmenter",
    "SegmenterConfig",
    "SegmenterModel",
    "argmax_labels",
    "build_segmenter",
    "model_from_checkpoint",
    "segment",
    "segment_scores",
    "train_segmenter",
]
