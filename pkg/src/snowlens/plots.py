"""Montages and the per-image Dice bar plot."""
import numpy as np

from ._validation import check_rgb_image
from .core import CLASS_NAMES, SNOW


def emit_montage(images, grid):
    """Tile equally sized images row-major on a ``(rows, cols)`` grid; empty cells are black."""
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be positive")
    images = [check_rgb_image(im) for im in images]
    if len(images) > rows * cols:
        raise ValueError(f"{len(images)} images do not fit a {rows}x{cols} grid")
    if not images:
        raise ValueError("no images to tile")
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"montage images must share one size, got {sorted(shapes)}")
    h, w, _ = images[0].shape
    canvas = np.zeros((rows * h, cols * w, 3), dtype=np.uint8)
    for k, im in enumerate(images):
        r, c = divmod(k, cols)
        canvas[r * h:(r + 1) * h, c * w:(c + 1) * w] = im
    return canvas


def emit_dice_barplot(batch, path, cls=SNOW):
    """Write a bar per image of the Dice for ``cls``; returns the plotted heights.

    Bars whose Dice came from an empty mask are hatched and outlined in red.
    """
    if len(batch) == 0:
        raise ValueError("cannot plot an empty Dice batch")
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    values = batch.values(cls)
    flagged = [r.empty[cls] for r in batch.reports]
    ids = [r.image_id for r in batch.reports]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(values) + 1.5), 3.2), dpi=100)
    bars = ax.bar(range(len(values)), values, color="#4a7ab5")
    for bar, flag in zip(bars, flagged):
        if flag:
            bar.set_hatch("//")
            bar.set_edgecolor("red")
            bar.set_facecolor("#c8c8c8")
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel(f"Dice ({CLASS_NAMES[cls]})")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(ids, rotation=90, fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return [float(b.get_height()) for b in bars]
