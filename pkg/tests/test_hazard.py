import numpy as np
import pytest

from oracles import brute_hazard
from snowlens.core import ROAD, SNOW
from snowlens.exceptions import NoRoadError
from snowlens.hazard import (
    HazardReport,
    day_hazard_pipeline,
    hazard_index,
    night_hazard_pipeline,
    snow_over_road,
)


def test_full_and_empty_cover():
    road = np.zeros((4, 4), dtype=np.uint8)
    snow = np.full((4, 4), SNOW)
    assert snow_over_road(snow, road).all()
    assert hazard_index(snow, road) == 100.0
    assert not snow_over_road(road, road).any()
    assert hazard_index(road, road) == 0.0


def test_quadrant_intersection():
    scl = np.full((10, 10), 2, dtype=np.uint8)
    scl[:, :5] = SNOW
    rsl = np.full((10, 10), 4, dtype=np.uint8)
    rsl[5:] = ROAD
    mask = snow_over_road(scl, rsl)
    assert mask.sum() == 25
    assert mask[5:, :5].all()


def test_two_hundred_road_fifty_covered():
    rsl = np.full((20, 20), 5, dtype=np.uint8)
    rsl[:10] = ROAD
    scl = np.zeros((20, 20), dtype=np.uint8)
    scl.flat[:50] = SNOW
    assert hazard_index(scl, rsl) == 25.0


def test_no_road_is_an_error_not_zero():
    sky = np.full((3, 3), 4, dtype=np.uint8)
    with pytest.raises(NoRoadError, match="no-road"):
        hazard_index(sky, sky)


def test_dimension_handling():
    with pytest.raises(ValueError):
        snow_over_road(np.zeros((2, 2)), np.zeros((4, 4)))
    scl = np.full((2, 2), SNOW)
    assert hazard_index(scl, np.zeros((4, 4)), reconcile=True) == 100.0


def test_brute_force_and_monotonicity(rng):
    for _ in range(20):
        scl = rng.integers(0, 6, (12, 12)).astype(np.uint8)
        rsl = rng.integers(0, 6, (12, 12)).astype(np.uint8)
        rsl[0, 0] = ROAD
        idx = hazard_index(scl, rsl)
        assert idx == brute_hazard(scl, rsl)
        assert 0.0 <= idx <= 100.0
        assert snow_over_road(scl, rsl).sum() <= min((scl == SNOW).sum(), (rsl == ROAD).sum())
        y, x = rng.integers(0, 12, 2)
        up = scl.copy()
        up[y, x] = SNOW
        down = scl.copy()
        down[y, x] = 0 if scl[y, x] == SNOW else scl[y, x]
        assert hazard_index(up, rsl) >= idx >= hazard_index(down, rsl)


def test_report_invariant():
    with pytest.raises(ValueError):
        HazardReport(10, 11, 110.0, "day-direct")
    assert HazardReport(200, 50, 25.0, "day-direct").to_dict()["index_display"] == "25.0"


class _Identity:
    def translate(self, image):
        return np.asarray(image).copy()


class _Oracle:
    """Segments by looking the frame up in a table of known labels."""

    def __init__(self, table):
        self.table = table

    def segment(self, image):
        return self.table[np.asarray(image).tobytes()]


def _scene_stub():
    from snowlens.synth import SceneParams, generate_scene

    scene = generate_scene(SceneParams(snow_coverage=0.4, seed=9))

    class Clearer:
        def translate(self, image):
            assert np.array_equal(image, scene.day)
            return scene.clear.copy()

    seg = _Oracle({scene.day.tobytes(): scene.label, scene.clear.tobytes(): scene.road_label})
    return scene, Clearer(), seg


def test_day_pipeline_with_exact_stages(tmp_path):
    scene, t, s = _scene_stub()
    stages = {}
    report = day_hazard_pipeline(scene.day, t, s, out_dir=tmp_path, stages=stages)
    assert report.index == pytest.approx(scene.hazard_index, abs=1e-12)
    assert report.source_tag == "day-direct"
    assert set(report.artifacts) == {"F", "RsL", "ScL", "overlay"}
    assert np.array_equal(stages["RsL"], scene.road_label)


def test_night_composition_identity():
    scene, t, s = _scene_stub()
    day = day_hazard_pipeline(scene.day, t, s)
    night = night_hazard_pipeline(scene.day, _Identity(), t, s)
    assert night.source_tag == "night-composed"
    assert (night.index, night.road_pixels, night.snow_over_road_pixels) == \
        (day.index, day.road_pixels, day.snow_over_road_pixels)


def test_no_road_pipeline_attaches_rsl(tmp_path):
    sky = np.full((8, 8, 3), 200, dtype=np.uint8)
    labels = np.full((8, 8), 4, dtype=np.uint8)
    seg = _Oracle({sky.tobytes(): labels})
    with pytest.raises(NoRoadError) as err:
        day_hazard_pipeline(sky, _Identity(), seg, out_dir=tmp_path)
    assert np.array_equal(err.value.rsl, labels)
    assert (tmp_path / "RsL.png").exists()
