import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snowlens.exceptions import OrphanFilesError
from snowlens.ingest import (
    SplitSpec,
    build_manifest,
    crop_grid,
    load_annotated_dataset,
    load_paired_dataset,
    reassemble_grid,
    resize_bilinear,
    resize_for_translator,
    resize_nearest,
    split,
    unify_size,
    verify_manifest,
    write_image,
)
from snowlens.synth import generate_dataset


def _write_pairs(root, ids, shape=(6, 9, 3)):
    (root / "night").mkdir(parents=True)
    (root / "day").mkdir()
    for i, sid in enumerate(ids):
        write_image(root / "night" / f"{sid}.png", np.full(shape, i, dtype=np.uint8))
        write_image(root / "day" / f"{sid}.png", np.full(shape, 100 + i, dtype=np.uint8))


def test_load_paired_sorted(tmp_path):
    _write_pairs(tmp_path, ["c", "a", "b"])
    samples = load_paired_dataset(tmp_path)
    assert [s.id for s in samples] == ["a", "b", "c"]
    assert samples[0].night[0, 0, 0] == 1 and samples[0].day[0, 0, 0] == 101


def test_orphan_night_file_is_named(tmp_path):
    _write_pairs(tmp_path, ["a"])
    write_image(tmp_path / "night" / "x.png", np.zeros((6, 9, 3), dtype=np.uint8))
    with pytest.raises(OrphanFilesError, match="x") as err:
        load_paired_dataset(tmp_path)
    assert err.value.orphans == ["x"]


def test_pair_dimension_mismatch(tmp_path):
    _write_pairs(tmp_path, ["a"])
    write_image(tmp_path / "day" / "a.png", np.zeros((7, 9, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="differ"):
        load_paired_dataset(tmp_path)


def test_synthetic_tree_matches_manifest(tmp_path):
    generate_dataset(8, tmp_path, seed=3)
    samples = load_paired_dataset(tmp_path / "paired")
    assert len(samples) == 8
    manifest = build_manifest(tmp_path / "paired", split_spec=SplitSpec(0.75, 1))
    assert verify_manifest(tmp_path / "paired", manifest) == []
    synth = json.loads((tmp_path / "manifest.json").read_text())
    from snowlens.ingest import file_sha256
    for s, entry in zip(samples, synth["scenes"]):
        assert s.id == entry["id"]
        assert file_sha256(tmp_path / "paired" / "night" / f"{s.id}.png") == entry["sha256"]["night"]
    assert sorted(e["split"] for e in manifest["samples"]).count("train") == 6
    annotated = load_annotated_dataset(tmp_path / "annotated")
    assert all(a.image.shape[:2] == a.label.shape for a in annotated)


def test_manifest_detects_tampering(tmp_path):
    _write_pairs(tmp_path, ["a", "b"])
    manifest = build_manifest(tmp_path)
    write_image(tmp_path / "day" / "b.png", np.zeros((6, 9, 3), dtype=np.uint8))
    assert verify_manifest(tmp_path, manifest) == ["b"]


def test_unify_identity_and_constant():
    img = np.random.default_rng(0).integers(0, 256, (480, 720, 3), dtype=np.uint8)
    assert np.array_equal(unify_size(img), img)
    const = np.full((960, 1440, 3), 77, dtype=np.uint8)
    out = unify_size(const)
    assert out.shape == (480, 720, 3) and (out == 77).all()
    with pytest.raises(ValueError):
        unify_size(img, 0, 720)


def test_bilinear_checkerboard_hand_weights():
    board = np.array([[0.0, 1.0], [1.0, 0.0]])
    # half-pixel sampling positions 0, .25, .75, 1 (clamped); f(y, x) = x + y - 2xy
    expected = np.array([
        [0.0, 0.25, 0.75, 1.0],
        [0.25, 0.375, 0.625, 0.75],
        [0.75, 0.625, 0.375, 0.25],
        [1.0, 0.75, 0.25, 0.0],
    ])
    np.testing.assert_allclose(resize_bilinear(board, 4, 4), expected, atol=1e-12)


def test_bilinear_matches_torch_reference(rng):
    import torch
    from torch.nn import functional as F

    img = rng.random((7, 11, 3))
    ref = F.interpolate(torch.from_numpy(img).permute(2, 0, 1)[None], size=(13, 5),
                        mode="bilinear", align_corners=False)[0].permute(1, 2, 0).numpy()
    np.testing.assert_allclose(resize_bilinear(img, 13, 5), ref, atol=1e-12)


def test_resize_for_translator_sizes():
    img = np.full((480, 720, 3), 200, dtype=np.uint8)
    assert resize_for_translator(img).shape == (512, 768, 3)
    desk = resize_for_translator(img, (128, 192), depth=6)
    assert desk.shape == (128, 192, 3) and (desk == 200).all()
    target = np.zeros((512, 768, 3), dtype=np.uint8)
    assert np.array_equal(resize_for_translator(target), target)
    with pytest.raises(ValueError, match="multiples of 256"):
        resize_for_translator(img, (500, 768), depth=8)


def test_nearest_never_blends(rng):
    label = rng.integers(0, 6, (13, 17)).astype(np.uint8)
    out = resize_nearest(label, 29, 7)
    assert set(np.unique(out)) <= set(np.unique(label))
    assert np.array_equal(resize_nearest(label, 13, 17), label)


def test_crop_grid_paper_geometry(rng):
    img = rng.integers(0, 256, (598, 1196, 3), dtype=np.uint8)
    label = rng.integers(0, 6, (598, 1196)).astype(np.uint8)
    tiles = crop_grid(img, label)
    assert len(tiles) == 8
    assert all(t.shape == (299, 299, 3) and l.shape == (299, 299) for t, l in tiles)
    assert np.array_equal(tiles[1][0], img[:299, 299:598])
    assert np.array_equal(reassemble_grid([t for t, _ in tiles], 2, 4), img)
    assert np.array_equal(reassemble_grid([l for _, l in tiles], 2, 4), label)


def test_crop_grid_single_and_error():
    img = np.arange(75, dtype=np.uint8).reshape(5, 5, 3)
    [(tile, lab)] = crop_grid(img, rows=1, cols=1, size=5)
    assert np.array_equal(tile, img) and lab is None
    with pytest.raises(ValueError, match="resize first"):
        crop_grid(np.zeros((600, 1196, 3), dtype=np.uint8))


@pytest.mark.parametrize("n,fraction,train", [(1130, 0.9, 1017), (4000, 0.93, 3720), (10, 0.25, 3)])
def test_split_sizes(n, fraction, train):
    tr, te = split(range(n), SplitSpec(fraction, seed=5))
    assert (len(tr), len(te)) == (train, n - train)


def test_split_rejects_bad_inputs():
    with pytest.raises(ValueError):
        split([], SplitSpec(0.9, 0))
    with pytest.raises(ValueError):
        SplitSpec(1.0, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_is_deterministic_partition(n, fraction, seed):
    items = list(range(n))
    tr, te = split(items, SplitSpec(fraction, seed))
    assert sorted(tr + te) == items and not set(tr) & set(te)
    assert split(items, SplitSpec(fraction, seed)) == (tr, te)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 40), st.integers(1, 40),
       st.integers(0, 255))
def test_resize_preserves_constants(h, w, th, tw, value):
    img = np.full((h, w, 3), value, dtype=np.uint8)
    assert (resize_bilinear(img, th, tw) == value).all()
