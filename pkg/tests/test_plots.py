import numpy as np
import pytest
from PIL import Image

from snowlens.core import SNOW
from snowlens.metrics import DiceBatch, DiceReport, dice_batch
from snowlens.plots import emit_dice_barplot, emit_montage


def _tiles(n, h=4, w=6):
    return [np.full((h, w, 3), 10 * (k + 1), dtype=np.uint8) for k in range(n)]


def test_full_grid_has_no_black_cells():
    m = emit_montage(_tiles(16), (4, 4))
    assert m.shape == (16, 24, 3)
    cells = m.reshape(4, 4, 6, 4, 3).swapaxes(1, 2)
    assert (cells.reshape(16, -1).max(axis=1) > 0).all()


def test_single_image_is_itself():
    [t] = _tiles(1)
    assert np.array_equal(emit_montage([t], (1, 1)), t)


def test_partial_grid_leaves_black_cell():
    m = emit_montage(_tiles(3), (2, 2))
    assert (m[4:, 6:] == 0).all()
    assert (m[4:, :6] == 30).all()


def test_montage_errors():
    with pytest.raises(ValueError):
        emit_montage(_tiles(5), (2, 2))
    with pytest.raises(ValueError):
        emit_montage([np.zeros((4, 6, 3), np.uint8), np.zeros((5, 6, 3), np.uint8)], (1, 2))


def _batch(values, flags=None):
    flags = flags or [False] * len(values)
    return DiceBatch([DiceReport(str(i), (SNOW,), {SNOW: v}, {SNOW: f})
                      for i, (v, f) in enumerate(zip(values, flags))])


def test_barplot_heights_and_png(tmp_path):
    heights = emit_dice_barplot(_batch([1.0, 1.0, 1.0]), tmp_path / "a.png")
    assert heights == [1.0, 1.0, 1.0]
    assert Image.open(tmp_path / "a.png").format == "PNG"
    assert emit_dice_barplot(_batch([0.4]), tmp_path / "b.png") == [0.4]


def test_barplot_matches_report_values(tmp_path, rng):
    real = [rng.integers(0, 6, (8, 8)) for _ in range(5)]
    fake = [rng.integers(0, 6, (8, 8)) for _ in range(5)]
    real[0][:] = 0
    fake[0][:] = 0  # both snow masks empty -> flagged bar
    batch = dice_batch(real, fake)
    heights = emit_dice_barplot(batch, tmp_path / "d.png")
    assert heights == [r.to_dict()["dice"]["snow"] for r in batch.reports]


def test_barplot_is_byte_stable(tmp_path):
    emit_dice_barplot(_batch([0.2, 0.9], [True, False]), tmp_path / "1.png")
    emit_dice_barplot(_batch([0.2, 0.9], [True, False]), tmp_path / "2.png")
    assert (tmp_path / "1.png").read_bytes() == (tmp_path / "2.png").read_bytes()


def test_barplot_empty_batch():
    with pytest.raises(ValueError):
        emit_dice_barplot(DiceBatch([]), "unused.png")
