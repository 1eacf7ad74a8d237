"""Lossless label-mask codec: indexed-palette PNG with palette index == class index."""
import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._validation import check_label_map
from .core import default_taxonomy
from .exceptions import CorruptMaskError, UnknownColorError


def encode_label_mask(label, taxonomy=None):
    """Encode a label map as palette-PNG bytes."""
    label = check_label_map(label)
    taxonomy = taxonomy or default_taxonomy()
    img = Image.frombytes("P", (label.shape[1], label.shape[0]), np.ascontiguousarray(label).tobytes())
    img.putpalette(taxonomy.palette.reshape(-1).tolist())
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def _colors_to_labels(rgb, palette):
    lut = {tuple(int(v) for v in color): idx for idx, color in enumerate(palette)}
    flat = rgb.reshape(-1, 3).astype(np.uint32)
    keys = (flat[:, 0] << 16) | (flat[:, 1] << 8) | flat[:, 2]
    out = np.full(keys.shape, 255, dtype=np.uint8)
    for color, idx in lut.items():
        out[keys == ((color[0] << 16) | (color[1] << 8) | color[2])] = idx
    bad = np.flatnonzero(out == 255)
    if bad.size:
        row, col = divmod(int(bad[0]), rgb.shape[1])
        raise UnknownColorError(rgb[row, col], row, col)
    return out.reshape(rgb.shape[:2])


def decode_label_mask(data, taxonomy=None):
    """Decode palette-PNG (or RGB-PNG) bytes into a label map.

    Palette images are mapped through their palette colors, so a file whose
    palette is reordered still decodes correctly.
    """
    taxonomy = taxonomy or default_taxonomy()
    palette = taxonomy.palette
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptMaskError(f"cannot decode mask file: {exc}") from exc
    if img.mode == "P":
        idx = np.asarray(img, dtype=np.uint8)
        raw = img.getpalette() or []
        raw = raw + [0] * (768 - len(raw))
        file_palette = np.array(raw[:768], dtype=np.uint8).reshape(256, 3)
        return _colors_to_labels(file_palette[idx], palette)
    return _colors_to_labels(np.asarray(img.convert("RGB")), palette)


def read_label_mask(path, taxonomy=None):
    with open(path, "rb") as f:
        return decode_label_mask(f.read(), taxonomy)


def write_label_mask(path, label, taxonomy=None):
    with open(path, "wb") as f:
        f.write(encode_label_mask(label, taxonomy))
