"""Procedural road scenes with exact ground-truth labels.

Each scene yields a snowy day image, its night rendition, the label map, and
a "clear" road-surface rendition where the snow on the road is removed (the
target of the snow-removal translator) together with that image's labels.
"""
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .core import BACKGROUND, GREEN, POLE_SIGN, ROAD, SKY, SNOW
from .ingest import file_sha256, write_image, write_json
from .maskio import write_label_mask

ROAD_RGB = np.array([92, 92, 98])
GREEN_RGB = np.array([74, 120, 52])
SNOW_RGB = np.array([244, 246, 250])
POLE_RGB = np.array([168, 168, 176])
SIGN_RGB = np.array([214, 196, 40])
BACKGROUND_RGB = np.array([86, 72, 64])
SKY_TOP_RGB = np.array([96, 150, 210])
SKY_HORIZON_RGB = np.array([176, 204, 230])


@dataclass(frozen=True)
class SceneParams:
    canvas: tuple = (128, 192)
    snow_coverage: float = 0.3
    pole_count: int = 2
    horizon: float = 0.38
    night_gain: float = 0.3
    noise_sigma: float = 6.0
    seed: int = 0
    shoulder_snow: float = 0.25

    def __post_init__(self):
        h, w = self.canvas
        if h < 16 or w < 16:
            raise ValueError(f"canvas must be at least 16x16, got {h}x{w}")
        for name in ("snow_coverage", "shoulder_snow"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.1 <= self.horizon <= 0.7:
            raise ValueError(f"horizon must lie in [0.1, 0.7], got {self.horizon}")
        if not 0.0 < self.night_gain <= 1.0:
            raise ValueError(f"night_gain must lie in (0, 1], got {self.night_gain}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 <= self.pole_count <= 8:
            raise ValueError("pole_count must lie in 0..8")


@dataclass
class Scene:
    params: SceneParams
    day: np.ndarray
    night: np.ndarray
    label: np.ndarray
    clear: np.ndarray
    road_label: np.ndarray
    road_pixels: int
    snow_over_road_pixels: int

    @property
    def hazard_index(self):
        return 100.0 * self.snow_over_road_pixels / self.road_pixels


def _road_region(h, w, horizon_row, rng):
    top = horizon_row + max(2, int(0.06 * h))
    half_bottom = rng.uniform(0.32, 0.44) * w
    half_top = rng.uniform(0.03, 0.07) * w
    centre_bottom = w / 2 + rng.uniform(-0.08, 0.08) * w
    centre_top = w / 2 + rng.uniform(-0.05, 0.05) * w
    yy, xx = np.mgrid[0:h, 0:w]
    t = np.clip((yy - top) / max(h - 1 - top, 1), 0.0, 1.0)
    centre = centre_top + t * (centre_bottom - centre_top)
    half = half_top + t * (half_bottom - half_top)
    return (yy >= top) & (np.abs(xx + 0.5 - centre) <= half), top


def _grow_blobs(region, target, rng, scale):
    """Cover exactly ``target`` pixels of ``region`` with elliptical blobs."""
    covered = np.zeros_like(region)
    if target <= 0:
        return covered
    if target >= region.sum():
        return region.copy()
    yy, xx = np.mgrid[0:region.shape[0], 0:region.shape[1]]
    while True:
        free = np.flatnonzero(region & ~covered)
        cy, cx = np.unravel_index(free[rng.integers(free.size)], region.shape)
        ry = rng.uniform(0.4, 1.0) * scale
        rx = ry * rng.uniform(1.2, 2.6)
        dist = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        blob = region & ~covered & (dist <= 1.0)
        blob[cy, cx] = True
        excess = int(covered.sum() + blob.sum() - target)
        if excess >= 0:
            # trim the outermost pixels of the final blob to hit the target exactly
            idx = np.flatnonzero(blob)
            order = np.argsort(-dist.reshape(-1)[idx], kind="stable")
            blob.reshape(-1)[idx[order[:excess]]] = False
            return covered | blob
        covered |= blob


def generate_scene(params):
    p = params
    h, w = p.canvas
    rng = np.random.default_rng(p.seed)
    horizon_row = int(round(p.horizon * h))

    label = np.full((h, w), GREEN, dtype=np.uint8)
    label[:horizon_row] = SKY
    band = max(2, int(0.06 * h))
    road, road_top = _road_region(h, w, horizon_row, rng)
    label[horizon_row:horizon_row + band] = BACKGROUND
    # distant buildings poking above the horizon
    for _ in range(rng.integers(2, 6)):
        x0 = int(rng.integers(0, w - 4))
        bw = int(rng.integers(4, max(5, w // 8)))
        bh = int(rng.integers(1, max(2, horizon_row // 4)))
        label[horizon_row - bh:horizon_row, x0:x0 + bw] = BACKGROUND
    label[road] = ROAD

    road_pixels = int(road.sum())
    road_snow = _grow_blobs(road, int(round(p.snow_coverage * road_pixels)), rng, 0.08 * h)
    shoulder = label == GREEN
    shoulder_snow = _grow_blobs(shoulder, int(round(p.shoulder_snow * shoulder.sum())), rng, 0.08 * h)

    road_label = label.copy()
    road_label[shoulder_snow] = SNOW
    label = road_label.copy()
    label[road_snow] = SNOW

    poles = np.zeros((h, w), dtype=bool)
    signs = np.zeros((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(p.pole_count):
        for _attempt in range(20):
            base = int(rng.integers(road_top + band, h))
            x = int(rng.integers(1, w - 2))
            pw = max(1, w // 96)
            cols = slice(x, x + pw)
            if not road[:, cols].any():
                break
        else:
            continue
        top = max(1, horizon_row - int(rng.integers(h // 10, h // 4)))
        poles[top:base, cols] = True
        sh, sw = max(2, h // 24), max(3, w // 24)
        signs[top:top + sh, max(0, x - sw // 2):x + sw // 2 + pw] = True
    signs &= ~road
    for lab in (label, road_label):
        lab[poles | signs] = POLE_SIGN

    def render(lab):
        img = np.zeros((h, w, 3), dtype=np.float64)
        t = (yy / max(horizon_row, 1))[..., None]
        img[:] = SKY_TOP_RGB + np.clip(t, 0, 1) * (SKY_HORIZON_RGB - SKY_TOP_RGB)
        shade = (0.85 + 0.15 * (yy - horizon_row) / max(h - horizon_row, 1))[..., None]
        for cls, rgb in ((ROAD, ROAD_RGB), (GREEN, GREEN_RGB), (BACKGROUND, BACKGROUND_RGB)):
            m = lab == cls
            img[m] = (rgb * shade)[m]
        img[lab == SNOW] = SNOW_RGB
        img[(lab == POLE_SIGN) & poles] = POLE_RGB
        img[(lab == POLE_SIGN) & signs] = SIGN_RGB
        return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)

    day = render(label)
    clear = render(road_label)
    noise = rng.normal(0.0, p.noise_sigma, size=day.shape) if p.noise_sigma > 0 else 0.0
    night = np.clip(np.floor(day * p.night_gain + noise + 0.5), 0, 255).astype(np.uint8)
    return Scene(
        params=p,
        day=day,
        night=night,
        label=label,
        clear=clear,
        road_label=road_label,
        road_pixels=road_pixels,
        snow_over_road_pixels=int(road_snow.sum()),
    )


def scene_params_for(n, base_params=None, seed=0):
    """Per-scene randomized parameters, drawn from a seeded stream."""
    base = base_params or SceneParams()
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(replace(
            base,
            snow_coverage=float(np.round(rng.uniform(0.0, 1.0), 4)),
            shoulder_snow=float(np.round(rng.uniform(0.0, 0.6), 4)),
            pole_count=int(rng.integers(0, 4)),
            horizon=float(np.round(rng.uniform(0.30, 0.45), 4)),
            seed=int(rng.integers(0, 2**31 - 1)),
        ))
    return out


def generate_dataset(n, out, base_params=None, seed=0, prefix="scene"):
    """Write paired, annotated and road-surface trees plus a manifest.

    Layout under ``out``::

        paired/night/<id>.png  paired/day/<id>.png
        annotated/images/<id>.png  annotated/masks/<id>.png
        roadsurface/day/<id>.png  roadsurface/clear/<id>.png  roadsurface/masks/<id>.png
        manifest.json
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    out = Path(out)
    dirs = {
        "night": out / "paired" / "night",
        "day": out / "paired" / "day",
        "images": out / "annotated" / "images",
        "masks": out / "annotated" / "masks",
        "rs_day": out / "roadsurface" / "day",
        "rs_clear": out / "roadsurface" / "clear",
        "rs_masks": out / "roadsurface" / "masks",
    }
    try:
        for d in dirs.values():
            d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset under {out}: {exc}") from exc

    scenes = []
    width = max(4, len(str(n - 1)))
    for i, params in enumerate(scene_params_for(n, base_params, seed)):
        sid = f"{prefix}{i:0{width}d}"
        scene = generate_scene(params)
        write_image(dirs["night"] / f"{sid}.png", scene.night)
        write_image(dirs["day"] / f"{sid}.png", scene.day)
        write_image(dirs["images"] / f"{sid}.png", scene.day)
        write_label_mask(dirs["masks"] / f"{sid}.png", scene.label)
        write_image(dirs["rs_day"] / f"{sid}.png", scene.day)
        write_image(dirs["rs_clear"] / f"{sid}.png", scene.clear)
        write_label_mask(dirs["rs_masks"] / f"{sid}.png", scene.road_label)
        entry = {
            "id": sid,
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(params).items()},
            "road_pixels": scene.road_pixels,
            "snow_over_road_pixels": scene.snow_over_road_pixels,
            "hazard_index": scene.hazard_index,
            "sha256": {
                "night": file_sha256(dirs["night"] / f"{sid}.png"),
                "day": file_sha256(dirs["day"] / f"{sid}.png"),
                "mask": file_sha256(dirs["masks"] / f"{sid}.png"),
                "clear": file_sha256(dirs["rs_clear"] / f"{sid}.png"),
                "road_mask": file_sha256(dirs["rs_masks"] / f"{sid}.png"),
            },
        }
        scenes.append(entry)
    manifest = {"n": n, "seed": seed, "scenes": scenes}
    write_json(out / "manifest.json", manifest)
    return manifest
