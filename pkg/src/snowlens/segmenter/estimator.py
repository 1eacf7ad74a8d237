"""scikit-learn style wrapper around the segmenter."""
import sys
from pathlib import Path

import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .._validation import check_rgb_image
from ..checkpoint import Checkpoint
from ..ingest import crop_grid, reassemble_grid, resize_bilinear
from ..metrics import confusion_matrix, summarize
from .core import (
    SegmenterConfig,
    argmax_labels,
    build_segmenter,
    model_from_checkpoint,
    segment_scores,
    train_segmenter,
)


class DeepLabSegmenter(BaseEstimator):
    """Six-class road-scene segmenter.

    ``fit`` takes crops at ``input_size`` and their label maps. Frames of any
    other size are handled by :meth:`segment`, which resizes them onto a
    ``grid`` of crops, segments each crop and maps the stitched class
    probabilities back to the frame size before the argmax.
    """

    def __init__(self, input_size=(96, 96), output_stride=16, aspp_rates=(6, 12, 18),
                 width_mult=0.35, aspp_channels=64, low_level_channels=24, decoder_channels=64,
                 num_stages=7, epochs=10, batch_size=16, learning_rate=1e-3, seed=0,
                 class_weighting="none", checkpoint_every=0, checkpoint_dir=None, grid=(2, 4),
                 backbone_weights=None, verbose=False):
        self.input_size = input_size
        self.output_stride = output_stride
        self.aspp_rates = aspp_rates
        self.width_mult = width_mult
        self.aspp_channels = aspp_channels
        self.low_level_channels = low_level_channels
        self.decoder_channels = decoder_channels
        self.num_stages = num_stages
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.class_weighting = class_weighting
        self.checkpoint_every = checkpoint_every
        self.checkpoint_dir = checkpoint_dir
        self.grid = grid
        self.backbone_weights = backbone_weights
        self.verbose = verbose

    _CONFIG_KEYS = ("output_stride", "width_mult", "aspp_channels", "low_level_channels",
                    "decoder_channels", "num_stages", "epochs", "batch_size", "learning_rate",
                    "seed", "class_weighting", "checkpoint_every")

    def _config(self):
        return SegmenterConfig(input_size=tuple(self.input_size), aspp_rates=tuple(self.aspp_rates),
                               **{k: getattr(self, k) for k in self._CONFIG_KEYS})

    def fit(self, X, y, resume_from=None, progress=None):
        if progress is None and self.verbose:
            def progress(row):
                print(f"[segmenter] epoch {row['epoch']}: loss={row['loss']:.4f} "
                      f"miou_train={row['miou_train']:.4f}", file=sys.stderr)
        self.trail_ = train_segmenter(self._config(), list(X), list(y), resume_from=resume_from,
                                      checkpoint_dir=self.checkpoint_dir, progress=progress,
                                      backbone_weights=self.backbone_weights)
        self.model_ = model_from_checkpoint(self.trail_[-1])
        self.loss_curve_ = self.trail_[-1].manifest["loss_curve"]
        return self

    def initialize(self):
        self.model_ = build_segmenter(self._config(), self.backbone_weights)
        self.trail_ = []
        self.loss_curve_ = []
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("DeepLabSegmenter is not fitted yet; call fit or load")

    def segment_scores(self, image):
        self._check_fitted()
        return segment_scores(self.model_, image)

    def _frame_scores(self, image):
        image = check_rgb_image(image)
        h, w = self.input_size
        if image.shape[:2] == (h, w):
            return self.segment_scores(image)
        if h != w:
            raise ValueError("grid segmentation needs square crops")
        rows, cols = self.grid
        canvas = resize_bilinear(image, rows * h, cols * w)
        tiles = [self.segment_scores(tile) for tile, _ in crop_grid(canvas, None, rows, cols, h)]
        scores = reassemble_grid(tiles, rows, cols)
        return resize_bilinear(scores, *image.shape[:2])

    def predict_proba(self, X):
        return [self._frame_scores(im) for im in X]

    def segment(self, image):
        """Label map at the image's own size."""
        return argmax_labels(self._frame_scores(image))

    def predict(self, X):
        return [self.segment(im) for im in X]

    def score(self, X, y):
        """Mean IoU of the predictions against ``y``."""
        return summarize(confusion_matrix(self.predict(X), y)).mean_iou

    def save(self, path):
        self._check_fitted()
        path = Path(path)
        if self.trail_:
            ckpt = self.trail_[-1]
        else:
            from .core import _snapshot

            ckpt = _snapshot(self.model_, torch.optim.Adam(self.model_.parameters()), 0, [])
        ckpt.save(path.parent, path.stem)
        return path

    @classmethod
    def load(cls, path, **overrides):
        ckpt = Checkpoint.load(path)
        cfg = SegmenterConfig.from_dict(ckpt.manifest["config"])
        est = cls(input_size=cfg.input_size, aspp_rates=cfg.aspp_rates,
                  **{k: getattr(cfg, k) for k in cls._CONFIG_KEYS})
        est.set_params(**overrides)
        est.model_ = model_from_checkpoint(ckpt)
        est.trail_ = [ckpt]
        est.loss_curve_ = ckpt.manifest["loss_curve"]
        return est
