import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from snowlens.core import (
    CLASS_NAMES,
    ClassTaxonomy,
    class_mask,
    default_taxonomy,
    mask_intersection,
    overlay,
    parse_class,
)

label_maps = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)),
                    elements=st.integers(0, 5))


def test_taxonomy_canonical_order_and_palette():
    tax = default_taxonomy()
    assert tax.names == ("road", "pole-sign", "green", "snow", "sky", "background")
    assert [c.index for c in tax.classes] == list(range(6))
    assert tax.palette.tolist() == [
        [128, 64, 128], [220, 220, 0], [107, 142, 35], [255, 255, 255], [70, 130, 180], [0, 0, 0],
    ]


def test_taxonomy_json_round_trip(tmp_path):
    path = tmp_path / "tax.json"
    path.write_text(json.dumps(default_taxonomy().to_json()))
    assert ClassTaxonomy.load(path) == default_taxonomy()


def test_taxonomy_rejects_duplicate_colors():
    entries = default_taxonomy().to_json()
    entries[1]["color"] = entries[0]["color"]
    with pytest.raises(ValueError, match="unique"):
        ClassTaxonomy.from_json(entries)


def test_parse_class_by_name_and_index():
    assert parse_class("snow") == 3
    assert parse_class("0") == 0
    assert parse_class(5) == 5
    with pytest.raises(ValueError):
        parse_class("ice")


def test_class_mask_uniform():
    snow = np.full((2, 2), 3)
    assert class_mask(snow, 3).sum() == 4
    assert class_mask(snow, 0).sum() == 0


def test_class_mask_anti_diagonal():
    mask = class_mask(np.array([[0, 3], [3, 5]]), 3)
    assert mask.tolist() == [[False, True], [True, False]]


@pytest.mark.parametrize("cls", [-1, 6, 2.0, "3"])
def test_class_mask_rejects_bad_index(cls):
    with pytest.raises(ValueError):
        class_mask(np.zeros((2, 2), dtype=np.uint8), cls)


def test_mask_intersection_examples():
    a = np.zeros((3, 3), dtype=bool)
    a.flat[:6] = True
    b = np.zeros((3, 3), dtype=bool)
    b.flat[3:7] = True
    assert mask_intersection(a, b).sum() == 3
    assert np.array_equal(mask_intersection(a, a), a)
    assert not mask_intersection(a, ~a).any()
    with pytest.raises(ValueError, match="mismatch"):
        mask_intersection(a, np.ones((2, 3), dtype=bool))


@given(label_maps)
def test_class_masks_partition_grid(label):
    masks = [class_mask(label, c) for c in range(6)]
    assert sum(int(m.sum()) for m in masks) == label.size
    for i in range(6):
        for j in range(i + 1, 6):
            assert not (masks[i] & masks[j]).any()


@given(st.data())
def test_intersection_algebra(data):
    shape = data.draw(st.tuples(st.integers(1, 8), st.integers(1, 8)))
    a, b, c = (data.draw(arrays(bool, shape)) for _ in range(3))
    assert np.array_equal(mask_intersection(a, b), mask_intersection(b, a))
    assert np.array_equal(mask_intersection(mask_intersection(a, b), c),
                          mask_intersection(a, mask_intersection(b, c)))
    assert np.array_equal(mask_intersection(a, a), a)
    assert mask_intersection(a, b).sum() <= min(a.sum(), b.sum())


def test_overlay_alpha_extremes(rng):
    image = rng.integers(0, 256, (4, 5, 3), dtype=np.uint8)
    label = rng.integers(0, 6, (4, 5))
    assert np.array_equal(overlay(image, label, 0.0), image)
    assert np.array_equal(overlay(image, label, 1.0), default_taxonomy().palette[label])


def test_overlay_half_blend_rounds_half_up():
    white = np.full((1, 1, 3), 255, dtype=np.uint8)
    # (255 + 128) / 2 = 191.5 -> 192, (255 + 64) / 2 = 159.5 -> 160
    assert overlay(white, np.array([[0]]), 0.5)[0, 0].tolist() == [192, 160, 192]


def test_overlay_validates_inputs():
    image = np.zeros((2, 2, 3), dtype=np.uint8)
    with pytest.raises(ValueError):
        overlay(image, np.zeros((3, 2)), 0.5)
    with pytest.raises(ValueError):
        overlay(image, np.zeros((2, 2)), 1.5)


def test_class_names_constant_matches_taxonomy():
    assert CLASS_NAMES == default_taxonomy().names
