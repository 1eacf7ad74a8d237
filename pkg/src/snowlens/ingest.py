"""Dataset loading, deterministic splits and the resize/crop geometry."""
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_label_map, check_rgb_image
from .exceptions import OrphanFilesError
from .maskio import read_label_mask

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
UNIFIED_SIZE = (480, 720)
TRANSLATOR_SIZE = {"paper": (512, 768), "desk": (128, 192)}
SEGMENTATION_CANVAS = (598, 1196)


@dataclass(frozen=True)
class PairedSample:
    id: str
    night: np.ndarray
    day: np.ndarray

    def __post_init__(self):
        if self.night.shape != self.day.shape:
            raise ValueError(
                f"pair {self.id!r}: night {self.night.shape} and day {self.day.shape} differ"
            )


@dataclass(frozen=True)
class AnnotatedSample:
    id: str
    image: np.ndarray
    label: np.ndarray

    def __post_init__(self):
        if self.image.shape[:2] != self.label.shape:
            raise ValueError(
                f"sample {self.id!r}: image {self.image.shape[:2]} and label {self.label.shape} differ"
            )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


# -- file I/O ---------------------------------------------------------------

def read_image(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, image):
    image = check_rgb_image(image)
    Image.fromarray(image).save(path, format="PNG")


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def index_dir(directory, suffixes):
    """Map sample id (file stem) to path for files with the given suffixes."""
    found = {}
    for p in sorted(Path(directory).iterdir()):
        if p.is_file() and p.suffix.lower() in suffixes:
            if p.stem in found:
                raise ValueError(f"duplicate sample id {p.stem!r} in {directory}")
            found[p.stem] = p
    return found


def match_ids(left, right):
    """Sorted shared ids; raise OrphanFilesError if either side has extras."""
    orphans = set(left) ^ set(right)
    if orphans:
        raise OrphanFilesError(orphans)
    return sorted(left)


def paired_files(root):
    root = Path(root)
    night = index_dir(root / "night", IMAGE_SUFFIXES)
    day = index_dir(root / "day", IMAGE_SUFFIXES)
    return [(i, night[i], day[i]) for i in match_ids(night, day)]


def annotated_files(root):
    root = Path(root)
    images = index_dir(root / "images", IMAGE_SUFFIXES)
    masks = index_dir(root / "masks", (".png",))
    return [(i, images[i], masks[i]) for i in match_ids(images, masks)]


def load_paired_dataset(root):
    """Load ``<root>/night/<id>`` and ``<root>/day/<id>`` pairs, sorted by id."""
    samples = []
    for sid, night_path, day_path in paired_files(root):
        samples.append(PairedSample(sid, read_image(night_path), read_image(day_path)))
    return samples


def load_annotated_dataset(root, taxonomy=None):
    samples = []
    for sid, image_path, mask_path in annotated_files(root):
        samples.append(
            AnnotatedSample(sid, read_image(image_path), read_label_mask(mask_path, taxonomy))
        )
    return samples


# -- geometry ---------------------------------------------------------------

def _bilinear_taps(n_in, n_out):
    # Half-pixel centres, edge-clamped.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(image, height, width):
    """Bilinear resize of an H x W (x C) array.

    ``uint8`` input is rounded half up back to bytes; float input stays float.
    """
    if height < 1 or width < 1:
        raise ValueError(f"target size must be positive, got {height}x{width}")
    arr = np.asarray(image)
    if arr.shape[:2] == (height, width):
        return arr.copy()
    src = arr.astype(np.float64)
    y0, y1, wy = _bilinear_taps(arr.shape[0], height)
    x0, x1, wx = _bilinear_taps(arr.shape[1], width)
    extra = (None,) * (arr.ndim - 2)
    wy = wy[(slice(None), None) + extra]
    wx = wx[(None, slice(None)) + extra]
    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bottom = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    if arr.dtype == np.uint8:
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out.astype(arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float64)


def resize_nearest(label, height, width):
    """Nearest-neighbour resize; class indices never blend."""
    if height < 1 or width < 1:
        raise ValueError(f"target size must be positive, got {height}x{width}")
    arr = np.asarray(label)
    rows = np.minimum(((np.arange(height) + 0.5) * arr.shape[0] / height).astype(np.int64), arr.shape[0] - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * arr.shape[1] / width).astype(np.int64), arr.shape[1] - 1)
    return arr[rows][:, cols].copy()


def unify_size(image, target_h=UNIFIED_SIZE[0], target_w=UNIFIED_SIZE[1]):
    image = check_rgb_image(image)
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target size must be positive, got {target_h}x{target_w}")
    return resize_bilinear(image, target_h, target_w)


def resize_for_translator(image, target=TRANSLATOR_SIZE["paper"], depth=8):
    """Resize to the translator input size, which must be a multiple of 2**depth."""
    multiple = 2 ** depth
    h, w = target
    if h <= 0 or w <= 0 or h % multiple or w % multiple:
        raise ValueError(
            f"translator input {h}x{w} must be positive multiples of {multiple} (2**{depth})"
        )
    return resize_bilinear(image, h, w)


def crop_grid(image, label=None, rows=2, cols=4, size=299):
    """Cut an image (and optional label) into a rows x cols grid of square tiles.

    Tiles come back in row-major order as ``(image_tile, label_tile)`` pairs;
    the label tile is ``None`` when no label is given.
    """
    image = np.asarray(image)
    expected = (rows * size, cols * size)
    if image.shape[:2] != expected:
        raise ValueError(
            f"crop_grid needs a {expected[0]}x{expected[1]} input for a {rows}x{cols} grid "
            f"of {size}px tiles, got {image.shape[0]}x{image.shape[1]}; resize first"
        )
    if label is not None:
        label = check_label_map(label)
        if label.shape != expected:
            raise ValueError(f"label shape {label.shape} does not match image {expected}")
    tiles = []
    for r in range(rows):
        for c in range(cols):
            window = (slice(r * size, (r + 1) * size), slice(c * size, (c + 1) * size))
            tiles.append((image[window].copy(), None if label is None else label[window].copy()))
    return tiles


def reassemble_grid(tiles, rows, cols):
    """Inverse of :func:`crop_grid` for a list of row-major tiles."""
    if len(tiles) != rows * cols:
        raise ValueError(f"expected {rows * cols} tiles, got {len(tiles)}")
    return np.concatenate(
        [np.concatenate(tiles[r * cols:(r + 1) * cols], axis=1) for r in range(rows)], axis=0
    )


def prepare_segmentation_crops(samples, rows=2, cols=4, size=299):
    """Resize annotated samples to the grid canvas and cut them into crops."""
    crops = []
    h, w = rows * size, cols * size
    for s in samples:
        image = resize_bilinear(s.image, h, w)
        label = resize_nearest(s.label, h, w)
        for k, (ci, cl) in enumerate(crop_grid(image, label, rows, cols, size)):
            crops.append(AnnotatedSample(f"{s.id}_{k}", ci, cl))
    return crops


# -- splitting & manifests --------------------------------------------------

def train_count(n, train_fraction):
    return int(np.floor(train_fraction * n + 0.5))


def split(samples, spec):
    """Seeded shuffle, then the first ``round(train_fraction * n)`` go to train.

    Both halves keep the input order so downstream artifacts are stable.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("cannot split an empty sample list")
    n = len(samples)
    order = np.random.default_rng(spec.seed).permutation(n)
    k = train_count(n, spec.train_fraction)
    train_idx = np.sort(order[:k])
    test_idx = np.sort(order[k:])
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def build_manifest(root, layout="paired", split_spec=None, extra=None):
    """Hash every sample file under ``root`` and record its split tag."""
    root = Path(root)
    listing = paired_files(root) if layout == "paired" else annotated_files(root)
    ids = [row[0] for row in listing]
    tags = {}
    if split_spec is not None:
        train, _ = split(ids, split_spec)
        train = set(train)
        tags = {i: ("train" if i in train else "test") for i in ids}
    entries = []
    for sid, *paths in listing:
        entries.append({
            "id": sid,
            "files": {p.parent.name: os.path.relpath(p, root) for p in paths},
            "sha256": {p.parent.name: file_sha256(p) for p in paths},
            "split": tags.get(sid),
        })
    manifest = {
        "layout": layout,
        "seed": None if split_spec is None else split_spec.seed,
        "train_fraction": None if split_spec is None else split_spec.train_fraction,
        "samples": entries,
    }
    if extra:
        manifest.update(extra)
    return manifest


def verify_manifest(root, manifest):
    """Return the ids whose on-disk hashes no longer match the manifest."""
    root = Path(root)
    bad = []
    for entry in manifest["samples"]:
        for key, rel in entry["files"].items():
            if file_sha256(root / rel) != entry["sha256"][key]:
                bad.append(entry["id"])
                break
    return bad


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
