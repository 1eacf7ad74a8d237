"""Class taxonomy, mask algebra and label overlays.

Images are plain numpy arrays: ``uint8`` H x W x 3 for byte-range RGB,
``float32`` H x W x 3 in [-1, 1] for signed-unit RGB, ``uint8`` H x W class
indices for label maps and ``bool`` H x W for pixel masks.
"""
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ._validation import (
    check_class_index,
    check_label_map,
    check_mask,
    check_rgb_image,
    check_same_shape,
)

ROAD, POLE_SIGN, GREEN, SNOW, SKY, BACKGROUND = range(6)
CLASS_NAMES = ("road", "pole-sign", "green", "snow", "sky", "background")


@dataclass(frozen=True)
class TaxonomyClass:
    index: int
    name: str
    color: tuple


@dataclass(frozen=True)
class ClassTaxonomy:
    classes: tuple

    def __post_init__(self):
        indices = [c.index for c in self.classes]
        if indices != list(range(len(CLASS_NAMES))):
            raise ValueError(f"taxonomy indices must be 0..5 in order, got {indices}")
        names = tuple(c.name for c in self.classes)
        if names != CLASS_NAMES:
            raise ValueError(f"taxonomy must list {CLASS_NAMES}, got {names}")
        colors = [c.color for c in self.classes]
        if len(set(colors)) != len(colors):
            raise ValueError("taxonomy colors must be unique")

    def __len__(self):
        return len(self.classes)

    @property
    def names(self):
        return tuple(c.name for c in self.classes)

    @property
    def palette(self):
        """(6, 3) uint8 array; row i is the color of class i."""
        return np.array([c.color for c in self.classes], dtype=np.uint8)

    def index_of(self, name):
        return self.names.index(name)

    def to_json(self):
        return [
            {"index": c.index, "name": c.name, "color": list(c.color)} for c in self.classes
        ]

    @classmethod
    def from_json(cls, entries):
        classes = []
        for e in sorted(entries, key=lambda e: e["index"]):
            color = tuple(int(v) for v in e["color"])
            if len(color) != 3 or not all(0 <= v <= 255 for v in color):
                raise ValueError(f"bad color for class {e['name']!r}: {e['color']}")
            classes.append(TaxonomyClass(int(e["index"]), str(e["name"]), color))
        return cls(tuple(classes))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(json.load(f))


@lru_cache(maxsize=None)
def default_taxonomy():
    text = resources.files("snowlens").joinpath("taxonomy.json").read_text()
    return ClassTaxonomy.from_json(json.loads(text))


def parse_class(value):
    """Accept a class index or name (``"snow"``) and return the index."""
    if isinstance(value, str):
        value = value.strip()
        if value.isdigit():
            return check_class_index(int(value))
        if value not in CLASS_NAMES:
            raise ValueError(f"unknown class name {value!r}; expected one of {CLASS_NAMES}")
        return CLASS_NAMES.index(value)
    return check_class_index(value)


def class_mask(label, cls):
    label = check_label_map(label)
    return label == check_class_index(cls)


def mask_intersection(a, b):
    a = check_mask(a, "a")
    b = check_mask(b, "b")
    check_same_shape(a, b, "mask")
    return a & b


def overlay(image, label, alpha=0.5, taxonomy=None):
    """Blend class colors over ``image``: ``(1 - alpha) * image + alpha * color``.

    The result is rounded half up to bytes, so golden images are bit-exact.
    """
    image = check_rgb_image(image)
    label = check_label_map(label)
    check_same_shape(image, label, "image/label")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    palette = (taxonomy or default_taxonomy()).palette.astype(np.float64)
    blended = (1.0 - alpha) * image.astype(np.float64) + alpha * palette[label]
    return np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)


def highlight_mask(image, mask, color=(255, 0, 0), alpha=0.5):
    """Tint the pixels of ``mask`` on ``image`` (used for hazard ROI overlays)."""
    image = check_rgb_image(image)
    mask = check_mask(mask)
    check_same_shape(image, mask, "image/mask")
    out = image.astype(np.float64)
    out[mask] = (1.0 - alpha) * out[mask] + alpha * np.asarray(color, dtype=np.float64)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
