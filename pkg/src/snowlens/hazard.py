"""Snow-over-road ROI, the 0-100 hazard index and the composed pipelines."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_label_map, check_same_shape
from .core import ROAD, SNOW, class_mask, highlight_mask, mask_intersection
from .exceptions import NoRoadError
from .ingest import resize_nearest, write_image
from .maskio import write_label_mask


def _reconcile(scl, rsl):
    if scl.shape != rsl.shape:
        scl = resize_nearest(scl, *rsl.shape)
    return scl


def snow_over_road(scl, rsl, reconcile=False):
    """Pixels labelled snow in ``scl`` and road in ``rsl``.

    With ``reconcile=True`` a differently sized ``scl`` is nearest-neighbour
    resized to ``rsl``'s dimensions first; otherwise sizes must match.
    """
    scl = check_label_map(scl, "scl")
    rsl = check_label_map(rsl, "rsl")
    if reconcile:
        scl = _reconcile(scl, rsl)
    check_same_shape(scl, rsl, "scl/rsl")
    return mask_intersection(class_mask(scl, SNOW), class_mask(rsl, ROAD))


def hazard_counts(scl, rsl, reconcile=False):
    rsl = check_label_map(rsl, "rsl")
    road = int(class_mask(rsl, ROAD).sum())
    if road == 0:
        raise NoRoadError(rsl=rsl)
    return road, int(snow_over_road(scl, rsl, reconcile).sum())


def hazard_index(scl, rsl, reconcile=False):
    """``100 * |snow over road| / |road|``; raises NoRoadError without road."""
    road, covered = hazard_counts(scl, rsl, reconcile)
    return 100.0 * covered / road


@dataclass
class HazardReport:
    road_pixels: int
    snow_over_road_pixels: int
    index: float
    source_tag: str
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.snow_over_road_pixels <= self.road_pixels:
            raise ValueError("snow_over_road_pixels must lie in [0, road_pixels]")

    def to_dict(self):
        return {
            "verdict": "ok",
            "road_pixels": self.road_pixels,
            "snow_over_road_pixels": self.snow_over_road_pixels,
            "index": self.index,
            "index_display": f"{self.index:.1f}",
            "source_tag": self.source_tag,
            "artifacts": dict(sorted(self.artifacts.items())),
        }


def _persist(out_dir, name, array, kind):
    path = Path(out_dir) / f"{name}.png"
    if kind == "label":
        write_label_mask(path, array)
    else:
        write_image(path, array)
    return str(path)


def day_hazard_pipeline(raw_day, t, s, out_dir=None, source_tag="day-direct", stages=None):
    """Translate with the road-surface translator ``t``, segment both frames with ``s``.

    ``stages`` collects intermediate rasters (F, RsL, ScL) for the caller.
    Artifacts are written to ``out_dir`` when given; on a no-road frame the
    RsL raster is still written and attached to the raised NoRoadError.
    """
    stages = {} if stages is None else stages
    f = t.translate(raw_day)
    rsl = s.segment(f)
    scl = s.segment(raw_day)
    stages.update({"F": f, "RsL": rsl, "ScL": scl})
    artifacts = {}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        artifacts["F"] = _persist(out_dir, "F", f, "image")
        artifacts["RsL"] = _persist(out_dir, "RsL", rsl, "label")
        artifacts["ScL"] = _persist(out_dir, "ScL", scl, "label")
    try:
        road, covered = hazard_counts(scl, rsl, reconcile=True)
    except NoRoadError as exc:
        raise NoRoadError(f"{exc}; RsL artifact: {artifacts.get('RsL', '<in memory>')}", rsl=rsl) from None
    if out_dir is not None:
        roi = snow_over_road(scl, rsl, reconcile=True)
        frame = np.asarray(raw_day)
        if frame.shape[:2] != roi.shape:
            from .ingest import resize_bilinear

            frame = resize_bilinear(frame, *roi.shape)
        artifacts["overlay"] = _persist(out_dir, "snow_over_road", highlight_mask(frame, roi), "image")
    return HazardReport(road, covered, 100.0 * covered / road, source_tag, artifacts)


def night_hazard_pipeline(n, u, t, s, out_dir=None, stages=None):
    """Night frame -> fake day with ``u`` -> day pipeline."""
    stages = {} if stages is None else stages
    k = u.translate(n)
    stages["K"] = k
    artifacts = {}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        artifacts["K"] = _persist(out_dir, "K", k, "image")
    report = day_hazard_pipeline(k, t, s, out_dir, source_tag="night-composed", stages=stages)
    report.artifacts.update(artifacts)
    return report
