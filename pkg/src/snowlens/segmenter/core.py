"""Segmenter configuration, inference and the cross-entropy training loop."""
import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch.nn import functional as F

from .._torchutil import all_finite, config_hash, params_hash, seeded, to_signed
from .._validation import NUM_CLASSES, check_label_map, check_rgb_image
from ..checkpoint import Checkpoint
from ..exceptions import TrainingDivergedError
from ..metrics import ConfusionMatrix, confusion_accumulate, summarize
from .networks import DeepLabV3Plus


@dataclass(frozen=True)
class SegmenterConfig:
    input_size: tuple = (96, 96)
    num_classes: int = NUM_CLASSES
    output_stride: int = 16
    aspp_rates: tuple = (6, 12, 18)
    width_mult: float = 0.35
    aspp_channels: int = 64
    low_level_channels: int = 24
    decoder_channels: int = 64
    num_stages: int = 7
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    class_weighting: str = "none"
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.num_classes != NUM_CLASSES:
            raise ValueError(f"num_classes must be {NUM_CLASSES}")
        if self.output_stride not in (8, 16):
            raise ValueError(f"output_stride must be 8 or 16, got {self.output_stride}")
        if not self.aspp_rates or any(int(r) < 1 for r in self.aspp_rates):
            raise ValueError(f"aspp_rates must be positive integers, got {self.aspp_rates}")
        h, w = self.input_size
        if h < 1 or w < 1:
            raise ValueError("input_size must be positive")
        if self.class_weighting not in ("none", "frequency"):
            raise ValueError("class_weighting must be 'none' or 'frequency'")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")

    @classmethod
    def desk(cls, **overrides):
        return cls(**{"input_size": (96, 96), "width_mult": 0.35, "epochs": 10, **overrides})

    @classmethod
    def paper(cls, **overrides):
        return cls(**{"input_size": (299, 299), "width_mult": 1.0, "aspp_channels": 256,
                      "low_level_channels": 48, "decoder_channels": 256, "epochs": 30,
                      "batch_size": 16, "learning_rate": 1e-3, **overrides})

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["input_size"] = list(self.input_size)
        d["aspp_rates"] = list(self.aspp_rates)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["input_size"] = tuple(d["input_size"])
        d["aspp_rates"] = tuple(d["aspp_rates"])
        return cls(**d)


class SegmenterModel(DeepLabV3Plus):
    def __init__(self, config):
        super().__init__(config.num_classes, config.width_mult, config.output_stride,
                         tuple(config.aspp_rates), config.aspp_channels, config.low_level_channels,
                         config.decoder_channels, config.num_stages)
        self.config = config

    def padded_size(self, height, width):
        s = self.output_stride
        return -(-height // s) * s, -(-width // s) * s

    def feature_shape(self, height, width):
        ph, pw = self.padded_size(height, width)
        return ph // self.output_stride, pw // self.output_stride

    def logits(self, x):
        """NCHW signed-unit input of any size -> logits of the same spatial size."""
        h, w = x.shape[2:]
        ph, pw = self.padded_size(h, w)
        if (ph, pw) != (h, w):
            x = F.pad(x, (0, pw - w, 0, ph - h), mode="replicate")
        return self(x)[:, :, :h, :w]


def build_segmenter(cfg, backbone_weights=None):
    with seeded(cfg.seed):
        model = SegmenterModel(cfg)
    if backbone_weights is not None:
        state = torch.load(backbone_weights, map_location="cpu", weights_only=True)
        model.backbone.load_state_dict(state)
    model.eval()
    return model


def _check_input(model, image):
    image = check_rgb_image(image)
    if image.shape[:2] != tuple(model.config.input_size):
        raise ValueError(
            f"segmenter expects {model.config.input_size[0]}x{model.config.input_size[1]} input, "
            f"got {image.shape[0]}x{image.shape[1]}"
        )
    return image


def segment_scores(model, image):
    """H x W x 6 per-pixel class probabilities (float64, rows sum to 1)."""
    image = _check_input(model, image)
    model.eval()
    with torch.no_grad():
        logits = model.logits(to_signed(image))[0].double()
    return torch.softmax(logits, dim=0).permute(1, 2, 0).numpy()


def argmax_labels(scores):
    """Per-pixel argmax; ``np.argmax`` returns the first maximum, i.e. the lowest class."""
    scores = np.asarray(scores)
    if scores.ndim != 3 or scores.shape[2] != NUM_CLASSES:
        raise ValueError(f"scores must be H x W x {NUM_CLASSES}, got {scores.shape}")
    return np.argmax(scores, axis=2).astype(np.uint8)


def segment(model, image):
    return argmax_labels(segment_scores(model, image))


def _manifest(model, epoch, curve):
    cfg = model.config.to_dict()
    return {
        "kind": "segmenter",
        "config": cfg,
        "config_hash": config_hash(cfg),
        "epoch": epoch,
        "loss_curve": curve,
        "seed": model.config.seed,
        "content_hash": params_hash(model),
    }


def _snapshot(model, opt, epoch, curve):
    state = {
        "model": {k: v.clone() for k, v in model.state_dict().items()},
        "opt": opt.state_dict(),
        "epoch": epoch,
        "loss_curve": [dict(r) for r in curve],
    }
    return Checkpoint.from_state(epoch, state, _manifest(model, epoch, curve))


def model_from_checkpoint(ckpt):
    model = SegmenterModel(SegmenterConfig.from_dict(ckpt.manifest["config"]))
    model.load_state_dict(ckpt.state["model"])
    model.eval()
    return model


def class_weights(labels):
    """Median-frequency weights; classes absent from the data get weight 0."""
    counts = np.bincount(labels.reshape(-1), minlength=NUM_CLASSES).astype(np.float64)
    freq = counts / counts.sum()
    present = freq > 0
    w = np.zeros(NUM_CLASSES)
    w[present] = np.median(freq[present]) / freq[present]
    return torch.tensor(w, dtype=torch.float32)


def train_segmenter(cfg, images, labels, resume_from=None, checkpoint_dir=None, progress=None,
                    backbone_weights=None):
    """Minimize per-pixel cross-entropy with Adam; logs loss and training mIoU per epoch."""
    if len(images) == 0 or len(images) != len(labels):
        raise ValueError("need a non-empty, equally long list of images and labels")
    x_all = to_signed(np.stack([_check_input_cfg(cfg, im) for im in images]))
    y_np = np.stack([check_label_map(lb) for lb in labels])
    if y_np.shape[1:] != tuple(cfg.input_size):
        raise ValueError(f"labels must be {cfg.input_size}, got {y_np.shape[1:]}")
    y_all = torch.from_numpy(y_np.astype(np.int64))
    weight = class_weights(y_np) if cfg.class_weighting == "frequency" else None

    model = build_segmenter(cfg, backbone_weights)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    start, curve = 0, []
    if resume_from is not None:
        state = resume_from.state
        model.load_state_dict(state["model"])
        opt.load_state_dict(state["opt"])
        start, curve = int(state["epoch"]), list(state["loss_curve"])
    trail = [_snapshot(model, opt, start, curve)]
    if checkpoint_dir is not None:
        trail[-1].save(checkpoint_dir)

    n = len(x_all)
    for epoch in range(start + 1, cfg.epochs + 1):
        model.train()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        total, pixels, cm = 0.0, 0, ConfusionMatrix()
        for i in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(order[i:i + cfg.batch_size])
            x, y = x_all[idx], y_all[idx]
            logits = model.logits(x)
            loss = F.cross_entropy(logits, y, weight=weight)
            if not math.isfinite(loss.item()):
                raise TrainingDivergedError(f"non-finite segmenter loss at epoch {epoch}", trail[-1])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * y.numel()
            pixels += y.numel()
            pred = logits.argmax(1).numpy().astype(np.uint8)
            for p, g in zip(pred, y.numpy()):
                cm = confusion_accumulate(cm, p, g)
        model.eval()
        if not all_finite(model):
            raise TrainingDivergedError(f"non-finite parameters at epoch {epoch}", trail[-1])
        curve.append({"epoch": epoch, "loss": float(total / pixels),
                      "miou_train": float(summarize(cm).mean_iou)})
        if progress is not None:
            progress(curve[-1])
        if epoch == cfg.epochs or (cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0):
            trail.append(_snapshot(model, opt, epoch, curve))
            if checkpoint_dir is not None:
                trail[-1].save(checkpoint_dir)
    return trail


def _check_input_cfg(cfg, image):
    image = check_rgb_image(image)
    if image.shape[:2] != tuple(cfg.input_size):
        raise ValueError(f"training crops must be {cfg.input_size}, got {image.shape[:2]}")
    return image
