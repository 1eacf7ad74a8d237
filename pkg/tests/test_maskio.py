import io
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from snowlens.core import default_taxonomy
from snowlens.exceptions import CorruptMaskError, UnknownColorError
from snowlens.maskio import decode_label_mask, encode_label_mask


def _read_palette_png(data):
    """Minimal independent reader for palette PNGs of bit depth 1-8 (no Pillow)."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos, idat, palette = 8, b"", None
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        kind = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        if kind == b"IHDR":
            width, height, depth, color_type, _, _, interlace = struct.unpack(">IIBBBBB", body)
            assert color_type == 3 and depth in (1, 2, 4, 8) and interlace == 0
        elif kind == b"PLTE":
            palette = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3)
        elif kind == b"IDAT":
            idat += body
        pos += 12 + length
    raw = zlib.decompress(idat)
    row_bytes = (width * depth + 7) // 8
    stride = row_bytes + 1
    prev = [0] * row_bytes
    out = np.zeros((height, width), dtype=np.uint8)
    for y in range(height):
        ftype = raw[y * stride]
        line = raw[y * stride + 1:(y + 1) * stride]
        cur = [0] * row_bytes
        for x in range(row_bytes):
            a = cur[x - 1] if x else 0
            b = prev[x]
            c = prev[x - 1] if x else 0
            if ftype == 0:
                pred = 0
            elif ftype == 1:
                pred = a
            elif ftype == 2:
                pred = b
            elif ftype == 3:
                pred = (a + b) // 2
            else:
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
            cur[x] = (line[x] + pred) & 0xFF
        per_byte = 8 // depth
        mask = (1 << depth) - 1
        for x in range(width):
            byte = cur[x // per_byte]
            shift = 8 - depth * (x % per_byte + 1)
            out[y, x] = (byte >> shift) & mask
        prev = cur
    return out, palette


def test_single_pixel_road_encodes_palette_slot_zero():
    data = encode_label_mask(np.array([[0]]))
    img = Image.open(io.BytesIO(data))
    assert img.mode == "P" and img.size == (1, 1)
    assert img.getpalette()[:3] == [128, 64, 128]
    assert decode_label_mask(data).tolist() == [[0]]


def test_single_pixel_rgb_snow_decodes():
    buf = io.BytesIO()
    Image.new("RGB", (1, 1), (255, 255, 255)).save(buf, format="PNG")
    assert decode_label_mask(buf.getvalue()).tolist() == [[3]]


def test_off_palette_pixel_reports_color_and_location():
    rgb = default_taxonomy().palette[np.zeros((4, 5), dtype=np.uint8)].copy()
    rgb[2, 3] = (1, 2, 3)
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG")
    with pytest.raises(UnknownColorError) as err:
        decode_label_mask(buf.getvalue())
    assert (err.value.row, err.value.col, err.value.color) == (2, 3, (1, 2, 3))
    assert "RGB(1, 2, 3)" in str(err.value) and "row=2, col=3" in str(err.value)


def test_corrupt_file_raises():
    with pytest.raises(CorruptMaskError):
        decode_label_mask(b"not a png at all")


def test_reordered_palette_decodes_by_color():
    label = np.array([[0, 3], [4, 5]], dtype=np.uint8)
    perm = np.array([5, 4, 3, 2, 1, 0])
    img = Image.frombytes("P", (2, 2), perm[label].astype(np.uint8).tobytes())
    img.putpalette(default_taxonomy().palette[perm].reshape(-1).tolist())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    assert np.array_equal(decode_label_mask(buf.getvalue()), label)


def test_large_random_map_matches_independent_reader(rng):
    label = rng.integers(0, 6, (299, 299)).astype(np.uint8)
    indices, palette = _read_palette_png(encode_label_mask(label))
    assert np.array_equal(indices, label)
    assert np.array_equal(palette[:6], default_taxonomy().palette)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20)), elements=st.integers(0, 5)))
def test_round_trip_is_bit_exact(label):
    assert np.array_equal(decode_label_mask(encode_label_mask(label)), label)


def test_encoding_is_deterministic(rng):
    label = rng.integers(0, 6, (17, 23))
    assert encode_label_mask(label) == encode_label_mask(label.copy())
