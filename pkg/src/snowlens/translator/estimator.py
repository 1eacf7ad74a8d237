"""scikit-learn style wrapper around the translator machinery."""
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .._validation import check_rgb_image
from ..checkpoint import Checkpoint
from ..ingest import resize_bilinear
from .core import TranslatorConfig, build_translator, model_from_checkpoint, train_translator, translate


class Pix2PixTranslator(TransformerMixin, BaseEstimator):
    """Paired image translator (night -> day as role ``"U"``, snowy -> clear road as ``"T"``).

    ``fit(X, y)`` takes condition images ``X`` and target images ``y`` as
    sequences of uint8 H x W x 3 arrays; inputs of another size are resized
    bilinearly to ``input_size``. ``transform`` returns translated uint8
    images at ``input_size``, or at the input's own size when
    ``restore_size`` is set.
    """

    def __init__(self, input_size=(128, 192), depth=6, base_channels=16, l1_weight=100.0,
                 epochs=10, learning_rate=2e-4, adam_beta1=0.5, adam_beta2=0.999, batch_size=1,
                 seed=0, role_tag="U", gan_mode="bce", dropout=0.0, checkpoint_every=0,
                 checkpoint_dir=None, restore_size=False, verbose=False):
        self.input_size = input_size
        self.depth = depth
        self.base_channels = base_channels
        self.l1_weight = l1_weight
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.batch_size = batch_size
        self.seed = seed
        self.role_tag = role_tag
        self.gan_mode = gan_mode
        self.dropout = dropout
        self.checkpoint_every = checkpoint_every
        self.checkpoint_dir = checkpoint_dir
        self.restore_size = restore_size
        self.verbose = verbose

    def _config(self):
        return TranslatorConfig(
            input_size=tuple(self.input_size), depth=self.depth, base_channels=self.base_channels,
            l1_weight=self.l1_weight, epochs=self.epochs, learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, batch_size=self.batch_size,
            seed=self.seed, role_tag=self.role_tag, gan_mode=self.gan_mode, dropout=self.dropout,
            checkpoint_every=self.checkpoint_every,
        )

    def _prepare(self, images):
        h, w = self.input_size
        return [resize_bilinear(check_rgb_image(im), h, w) for im in images]

    def fit(self, X, y, resume_from=None, progress=None):
        cfg = self._config()
        if progress is None and self.verbose:
            import sys

            def progress(row):
                print(f"[translator {cfg.role_tag}] epoch {row['epoch']}: "
                      f"adv_g={row['adversarial_g']:.4f} adv_d={row['adversarial_d']:.4f} "
                      f"l1={row['l1']:.4f}", file=sys.stderr)
        self.trail_ = train_translator(cfg, self._prepare(X), self._prepare(y),
                                       resume_from=resume_from, checkpoint_dir=self.checkpoint_dir,
                                       progress=progress)
        self.model_ = model_from_checkpoint(self.trail_[-1])
        self.loss_curve_ = self.trail_[-1].manifest["loss_curve"]
        return self

    def initialize(self):
        """Seeded, untrained model (what ``fit`` starts from)."""
        self.model_ = build_translator(self._config())
        self.trail_ = []
        self.loss_curve_ = []
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("Pix2PixTranslator is not fitted yet; call fit or load")

    def translate(self, image, restore_size=None):
        self._check_fitted()
        image = check_rgb_image(image)
        restore = self.restore_size if restore_size is None else restore_size
        h, w = self.input_size
        out = translate(self.model_, resize_bilinear(image, h, w))
        if restore and out.shape[:2] != image.shape[:2]:
            out = resize_bilinear(out, *image.shape[:2])
        return out

    def transform(self, X):
        return [self.translate(im) for im in X]

    def save(self, path):
        """Write the fitted state as ``path`` (.pt) with a JSON sidecar."""
        self._check_fitted()
        path = Path(path)
        ckpt = self.trail_[-1] if self.trail_ else None
        if ckpt is None:
            from .core import _snapshot
            import torch

            dummy = torch.optim.Adam(self.model_.parameters())
            ckpt = _snapshot(self.model_, dummy, dummy, 0, [])
        ckpt.save(path.parent, path.stem)
        return path

    @classmethod
    def load(cls, path, **overrides):
        ckpt = Checkpoint.load(path)
        cfg = TranslatorConfig.from_dict(ckpt.manifest["config"])
        est = cls(input_size=cfg.input_size, depth=cfg.depth, base_channels=cfg.base_channels,
                  l1_weight=cfg.l1_weight, epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                  adam_beta1=cfg.adam_beta1, adam_beta2=cfg.adam_beta2, batch_size=cfg.batch_size,
                  seed=cfg.seed, role_tag=cfg.role_tag, gan_mode=cfg.gan_mode, dropout=cfg.dropout,
                  checkpoint_every=cfg.checkpoint_every)
        est.set_params(**overrides)
        est.model_ = model_from_checkpoint(ckpt)
        est.trail_ = [ckpt]
        est.loss_curve_ = ckpt.manifest["loss_curve"]
        return est
