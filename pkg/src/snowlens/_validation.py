"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""
import numpy as np

NUM_CLASSES = 6


def check_label_map(label, name="label"):
    label = np.asarray(label)
    if label.ndim != 2 or label.shape[0] < 1 or label.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {label.shape}")
    if not np.issubdtype(label.dtype, np.integer):
        if np.issubdtype(label.dtype, np.floating) and np.all(label == np.round(label)):
            label = label.astype(np.int64)
        else:
            raise ValueError(f"{name} must hold integer class indices")
    if label.size and (label.min() < 0 or label.max() >= NUM_CLASSES):
        raise ValueError(f"{name} values must lie in 0..{NUM_CLASSES - 1}")
    return label.astype(np.uint8, copy=False)


def check_class_index(cls):
    if isinstance(cls, (bool, np.bool_)) or not isinstance(cls, (int, np.integer)):
        raise ValueError(f"class index must be an integer, got {cls!r}")
    if not 0 <= int(cls) < NUM_CLASSES:
        raise ValueError(f"class index {cls} outside 0..{NUM_CLASSES - 1}")
    return int(cls)


def check_mask(mask, name="mask"):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def check_rgb_image(image, signed=False, name="image"):
    """Validate an H x W x 3 raster.

    Byte images are returned as ``uint8``; signed-unit images as ``float32``
    with every value in [-1, 1].
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"{name} must have shape (H, W, 3), got {image.shape}")
    if signed:
        image = image.astype(np.float32, copy=False)
        if not np.all(np.isfinite(image)) or image.min() < -1.0 or image.max() > 1.0:
            raise ValueError(f"{name} values must lie in [-1, 1]")
        return image
    if image.dtype != np.uint8:
        if image.size and (image.min() < 0 or image.max() > 255):
            raise ValueError(f"{name} values must lie in [0, 255]")
        image = image.astype(np.uint8)
    return image


def check_same_shape(a, b, what="inputs"):
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(f"{what} dimension mismatch: {a.shape[:2]} vs {b.shape[:2]}")
