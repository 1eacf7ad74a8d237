"""Translator configuration, forward passes, losses and the training loop."""
import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .._torchutil import all_finite, config_hash, params_hash, seeded, to_bytes, to_signed
from .._validation import check_rgb_image
from ..checkpoint import Checkpoint
from ..exceptions import TrainingDivergedError
from .networks import PatchDiscriminator, UNetGenerator, init_weights

log = logging.getLogger(__name__)

ROLES = ("U", "T")


@dataclass(frozen=True)
class TranslatorConfig:
    input_size: tuple = (128, 192)
    depth: int = 6
    base_channels: int = 16
    l1_weight: float = 100.0
    epochs: int = 200
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    batch_size: int = 1
    seed: int = 0
    role_tag: str = "U"
    gan_mode: str = "bce"
    dropout: float = 0.0
    norm: str = "instance"
    disc_strided_blocks: int = 3
    checkpoint_every: int = 0

    def __post_init__(self):
        h, w = self.input_size
        m = 2 ** self.depth
        if h <= 0 or w <= 0 or h % m or w % m:
            raise ValueError(f"input_size {h}x{w} must be positive multiples of {m} (2**depth)")
        if not self.l1_weight >= 0:
            raise ValueError("l1_weight must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.role_tag not in ROLES:
            raise ValueError(f"role_tag must be one of {ROLES}")
        if self.gan_mode not in ("bce", "lsgan"):
            raise ValueError("gan_mode must be 'bce' or 'lsgan'")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @classmethod
    def desk(cls, **overrides):
        return cls(**{"input_size": (128, 192), "depth": 6, "base_channels": 16, "epochs": 10,
                      **overrides})

    @classmethod
    def paper(cls, **overrides):
        return cls(**{"input_size": (512, 768), "depth": 8, "base_channels": 64,
                      "epochs": 200, "dropout": 0.5, **overrides})

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["input_size"] = list(self.input_size)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["input_size"] = tuple(d["input_size"])
        return cls(**d)


@dataclass
class GanLossTerms:
    adversarial_g: float
    adversarial_d: float
    l1: float
    l1_weight: float

    @property
    def total_g(self):
        return self.adversarial_g + self.l1_weight * self.l1


class TranslatorModel(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        self.generator = UNetGenerator(config.depth, config.base_channels, config.dropout, config.norm)
        self.discriminator = PatchDiscriminator(config.base_channels, config.disc_strided_blocks,
                                                config.norm)

    @property
    def bottleneck_shape(self):
        return self.generator.bottleneck_shape(*self.config.input_size)

    @property
    def patch_grid_shape(self):
        return self.discriminator.grid_shape(*self.config.input_size)


def build_translator(cfg):
    with seeded(cfg.seed):
        model = TranslatorModel(cfg)
        init_weights(model)
    model.eval()
    return model


def _check_tensor(model, x, name):
    if x.ndim != 4 or x.shape[1] != 3 or tuple(x.shape[2:]) != tuple(model.config.input_size):
        raise ValueError(
            f"{name} must be (N, 3, {model.config.input_size[0]}, {model.config.input_size[1]}), "
            f"got {tuple(x.shape)}"
        )


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x if x.ndim == 4 else x[None]
    arr = check_rgb_image(x, signed=True) if np.asarray(x).ndim == 3 else np.asarray(x, dtype=np.float32)
    t = torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))
    return (t[None] if t.ndim == 3 else t).permute(0, 3, 1, 2)


def generator_forward(model, x):
    """Signed-unit H x W x 3 (or NCHW tensor) -> signed-unit output of the same size."""
    squeeze = not isinstance(x, torch.Tensor) and np.asarray(x).ndim == 3
    t = _as_tensor(x)
    _check_tensor(model, t, "generator input")
    with torch.no_grad():
        y = model.generator(t)
    if isinstance(x, torch.Tensor):
        return y
    out = y.permute(0, 2, 3, 1).numpy()
    return out[0] if squeeze else out


def discriminator_forward(model, condition, candidate):
    c, y = _as_tensor(condition), _as_tensor(candidate)
    _check_tensor(model, c, "condition")
    _check_tensor(model, y, "candidate")
    with torch.no_grad():
        return model.discriminator(c, y)[:, 0].numpy()


def _adv_loss(logits, real, mode):
    target = torch.ones_like(logits) if real else torch.zeros_like(logits)
    if mode == "lsgan":
        return F.mse_loss(logits, target)
    return F.binary_cross_entropy_with_logits(logits, target)


def loss_tensors(model, condition, target):
    """Differentiable loss terms; returns (adv_g, adv_d, l1, total_g, fake)."""
    mode = model.config.gan_mode
    fake = model.generator(condition)
    adv_g = _adv_loss(model.discriminator(condition, fake), True, mode)
    l1 = (fake - target).abs().mean()
    adv_d = 0.5 * (
        _adv_loss(model.discriminator(condition, target), True, mode)
        + _adv_loss(model.discriminator(condition, fake.detach()), False, mode)
    )
    total_g = adv_g + model.config.l1_weight * l1
    return adv_g, adv_d, l1, total_g, fake


def translator_loss(model, condition, candidate_real):
    """Evaluate the adversarial and L1 terms for one (condition, target) batch."""
    c, y = _as_tensor(condition), _as_tensor(candidate_real)
    _check_tensor(model, c, "condition")
    _check_tensor(model, y, "candidate_real")
    with torch.no_grad():
        adv_g, adv_d, l1, _, _ = loss_tensors(model, c, y)
    terms = GanLossTerms(float(adv_g), float(adv_d), float(l1), model.config.l1_weight)
    if not all(math.isfinite(v) for v in (terms.adversarial_g, terms.adversarial_d, terms.l1)):
        raise TrainingDivergedError(f"non-finite translator loss: {terms}")
    return terms


def _manifest(model, epoch, curve, seed):
    cfg = model.config.to_dict()
    return {
        "kind": "translator",
        "role_tag": model.config.role_tag,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "epoch": epoch,
        "loss_curve": curve,
        "seed": seed,
        "content_hash": params_hash(model),
    }


def _snapshot(model, opt_g, opt_d, epoch, curve):
    state = {
        "model": {k: v.clone() for k, v in model.state_dict().items()},
        "opt_g": opt_g.state_dict(),
        "opt_d": opt_d.state_dict(),
        "epoch": epoch,
        "loss_curve": [dict(row) for row in curve],
    }
    return Checkpoint.from_state(epoch, state, _manifest(model, epoch, curve, model.config.seed))


def model_from_checkpoint(ckpt):
    cfg = TranslatorConfig.from_dict(ckpt.manifest["config"])
    model = TranslatorModel(cfg)
    model.load_state_dict(ckpt.state["model"])
    model.eval()
    return model


def _stack(images, size):
    arr = np.stack([check_rgb_image(im) for im in images])
    if arr.shape[1:3] != tuple(size):
        raise ValueError(f"training images must be {size[0]}x{size[1]}, got {arr.shape[1:3]}")
    return to_signed(arr)


def train_translator(cfg, conditions, targets, resume_from=None, checkpoint_dir=None, progress=None):
    """Alternating discriminator / generator Adam updates.

    Returns the checkpoint trail: the initial (or resumed) state, one every
    ``cfg.checkpoint_every`` epochs, and the final epoch. A non-finite loss
    raises TrainingDivergedError carrying the last good checkpoint.
    """
    if len(conditions) == 0 or len(conditions) != len(targets):
        raise ValueError("need a non-empty, equally long list of condition and target images")
    x_all = _stack(conditions, cfg.input_size)
    y_all = _stack(targets, cfg.input_size)

    model = build_translator(cfg)
    opt_g = torch.optim.Adam(model.generator.parameters(), cfg.learning_rate,
                             betas=(cfg.adam_beta1, cfg.adam_beta2))
    opt_d = torch.optim.Adam(model.discriminator.parameters(), cfg.learning_rate,
                             betas=(cfg.adam_beta1, cfg.adam_beta2))
    start, curve = 0, []
    if resume_from is not None:
        state = resume_from.state
        model.load_state_dict(state["model"])
        opt_g.load_state_dict(state["opt_g"])
        opt_d.load_state_dict(state["opt_d"])
        start, curve = int(state["epoch"]), list(state["loss_curve"])

    trail = [_snapshot(model, opt_g, opt_d, start, curve)]
    if checkpoint_dir is not None:
        trail[-1].save(checkpoint_dir)
    n = len(x_all)
    for epoch in range(start + 1, cfg.epochs + 1):
        model.train()
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        # dropout noise is seeded per epoch so a resumed run replays the same stream
        with seeded(int(rng.integers(2**31 - 1))):
            for i in range(0, n, cfg.batch_size):
                idx = torch.from_numpy(order[i:i + cfg.batch_size])
                x, y = x_all[idx], y_all[idx]
                adv_g, adv_d, l1, total_g, fake = loss_tensors(model, x, y)
                values = [t.item() for t in (adv_g, adv_d, l1, total_g)]
                if not all(math.isfinite(v) for v in values):
                    raise TrainingDivergedError(
                        f"non-finite translator loss at epoch {epoch}", last_checkpoint=trail[-1]
                    )
                opt_d.zero_grad()
                adv_d.backward()
                opt_d.step()
                # generator step against the freshly updated discriminator
                opt_g.zero_grad()
                adv_g2 = _adv_loss(model.discriminator(x, fake), True, cfg.gan_mode)
                (adv_g2 + cfg.l1_weight * l1).backward()
                opt_g.step()
                sums += values
                batches += 1
        means = sums / batches
        curve.append({"epoch": epoch, "adversarial_g": float(means[0]),
                      "adversarial_d": float(means[1]), "l1": float(means[2]),
                      "total_g": float(means[3])})
        model.eval()
        if not all_finite(model):
            raise TrainingDivergedError(f"non-finite parameters at epoch {epoch}", trail[-1])
        if progress is not None:
            progress(curve[-1])
        if epoch == cfg.epochs or (cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0):
            trail.append(_snapshot(model, opt_g, opt_d, epoch, curve))
            if checkpoint_dir is not None:
                trail[-1].save(checkpoint_dir)
    model.eval()
    return trail


def translate(model, n):
    """Byte image at the model's input size -> translated byte image."""
    image = check_rgb_image(n)
    if image.shape[:2] != tuple(model.config.input_size):
        raise ValueError(
            f"translate expects {model.config.input_size[0]}x{model.config.input_size[1]} input, "
            f"got {image.shape[0]}x{image.shape[1]}"
        )
    if not all_finite(model.generator):
        raise ValueError("translator parameters contain NaN/inf")
    model.eval()
    with torch.no_grad():
        return to_bytes(model.generator(to_signed(image)))[0]
