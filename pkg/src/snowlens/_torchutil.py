"""Small torch helpers shared by the translator and segmenter."""
import hashlib
import io
import json
from contextlib import contextmanager

import numpy as np
import torch


@contextmanager
def seeded(seed):
    """Run a block under ``seed`` without disturbing the global torch RNG."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def to_signed(images):
    """uint8 (N, H, W, 3) or (H, W, 3) -> float32 NCHW tensor in [-1, 1]."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    t = torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))
    return (t / 127.5 - 1.0).permute(0, 3, 1, 2).contiguous()


def to_bytes(tensor):
    """float NCHW in [-1, 1] -> uint8 NHWC, rounding half up with clamping."""
    arr = tensor.detach().permute(0, 2, 3, 1).cpu().numpy().astype(np.float64)
    return np.clip(np.floor((arr + 1.0) * 127.5 + 0.5), 0, 255).astype(np.uint8)


def state_to_bytes(state):
    buf = io.BytesIO()
    torch.save(state, buf)
    return buf.getvalue()


def state_from_bytes(blob):
    return torch.load(io.BytesIO(blob), map_location="cpu", weights_only=False)


def params_hash(module):
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def config_hash(config_dict):
    return hashlib.sha256(json.dumps(config_dict, sort_keys=True).encode()).hexdigest()


def all_finite(module):
    return all(torch.isfinite(p).all() for p in module.parameters())
