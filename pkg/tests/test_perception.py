import numpy as np
import pytest
from hypothesis import given, strategies as st

from nanonav.geometry import Pose2D
from nanonav.perception import (BoundingBox, CameraModel, Detection, DetectionNoise, Detector,
                                ObstacleClass, ObstacleSpec, perturb_detection, project_obstacle,
                                select_detection)

CAM65 = CameraModel(hfov_deg=65.0)
B1 = BoundingBox(10, 10, 50, 50)
B2 = BoundingBox(100, 20, 180, 120)


def cube_with_front_face_at(depth, cls="cube"):
    ob = ObstacleSpec.of_class(cls, 0.0, 0.0)
    return ObstacleSpec.of_class(cls, depth + ob.footprint_d / 2.0, 0.0)


def test_focal_length():
    assert CAM65.focal_px == pytest.approx(251.1, abs=0.05)


def test_select_examples():
    assert select_detection([], 0.5) is None
    got = select_detection([(B1, "cube", 0.4), (B2, "large", 0.9)], 0.5)
    assert got == Detection(ObstacleClass.LARGE, 0.9, B2)
    got = select_detection([(B1, "cube", 0.7), (B2, "short", 0.7)], 0.5)
    assert got == Detection(ObstacleClass.CUBE, 0.7, B1)


def test_select_rejects_at_threshold_and_above_one():
    assert select_detection([(B1, "cube", 0.5)], 0.5) is None
    assert select_detection([(B1, "cube", 1.2)], 0.5) is None


@given(st.lists(st.floats(0, 1), max_size=8), st.floats(0, 0.99))
def test_select_score_is_max_of_qualifying(scores, thr):
    raw = [(B1, "cube", s) for s in scores]
    got = select_detection(raw, thr)
    qual = [s for s in scores if s > thr]
    if not qual:
        assert got is None
    else:
        assert got.score == max(qual)


def test_cube_two_metres_ahead():
    box = project_obstacle(CAM65, Pose2D(0, 0, 0), cube_with_front_face_at(2.0))
    assert box.width == pytest.approx(251.1 * 0.5 / 2.0, abs=0.1)
    assert box.width == pytest.approx(63, abs=1)
    assert (box.xm + box.xM) / 2 == pytest.approx(160)


def test_behind_camera_is_empty():
    assert project_obstacle(CAM65, Pose2D(0, 0, 0), ObstacleSpec.of_class("cube", -2.0, 0.0)) is None
    assert project_obstacle(CAM65, Pose2D(0, 0, 180), ObstacleSpec.of_class("cube", 2.0, 0.0)) is None


def test_large_close_is_clipped():
    box = project_obstacle(CAM65, Pose2D(0, 0, 0), cube_with_front_face_at(0.6, "large"))
    assert 251.1 * 1.0 / 0.6 > 320
    assert (box.xm, box.xM) == (0.0, 320.0)


def test_off_axis_obstacle_sits_left():
    # positive y is to the left of a drone facing +x
    box = project_obstacle(CAM65, Pose2D(0, 0, 0), ObstacleSpec.of_class("cube", 3.0, 0.8))
    assert box.xM < 160


def test_class_dimensions():
    assert ObstacleSpec.of_class("large", 0, 0).footprint_w == 1.0
    assert ObstacleSpec.of_class("short", 0, 0).height == 1.0
    assert ObstacleSpec.of_class("column", 0, 0).height == 1.5


def test_width_decreases_with_depth():
    widths = [project_obstacle(CAM65, Pose2D(0, 0, 0), cube_with_front_face_at(d)).width
              for d in np.linspace(0.5, 3.0, 26)]
    assert all(a > b for a, b in zip(widths, widths[1:]))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-180, 180),
       st.sampled_from(list(ObstacleClass)))
def test_projected_box_is_valid(x, y, yaw, cls):
    ob = ObstacleSpec.of_class(cls, 0.0, 0.0)
    if ob.contains(x, y):
        return
    box = project_obstacle(CAM65, Pose2D(x, y, yaw), ob)
    if box is not None:
        assert box.is_valid(CAM65.width_px, CAM65.height_px)


def test_identity_noise():
    det = Detection(ObstacleClass.SHORT, 1.0, B2)
    assert perturb_detection(det, DetectionNoise(), np.random.default_rng(0)) is det
    assert perturb_detection(None, DetectionNoise(), np.random.default_rng(0)) is None


def test_miss_rate_one():
    det = Detection(ObstacleClass.SHORT, 1.0, B2)
    rng = np.random.default_rng(1)
    noise = DetectionNoise(3.0, 1.0, 0.0, (0.6, 0.9))
    assert all(perturb_detection(det, noise, rng) is None for _ in range(50))


def test_jitter_reproducible():
    det = Detection(ObstacleClass.SHORT, 1.0, B2)
    noise = DetectionNoise(4.0, 0.0, 0.0, (0.6, 0.9))
    a = perturb_detection(det, noise, np.random.default_rng(7))
    b = perturb_detection(det, noise, np.random.default_rng(7))
    assert a == b
    assert a.box != det.box
    assert a.box.is_valid()
    assert 0.6 <= a.score <= 0.9
    assert a.obstacle_id == det.obstacle_id


def test_false_positive_only_when_empty():
    noise = DetectionNoise(0.0, 0.0, 1.0, (0.6, 0.9))
    fp = perturb_detection(None, noise, np.random.default_rng(3))
    assert fp is not None and fp.box.is_valid()
    assert 10 <= fp.box.width <= 160


def test_noise_validation():
    with pytest.raises(ValueError):
        DetectionNoise(-1.0)
    with pytest.raises(ValueError):
        DetectionNoise(0.0, 1.5)
    with pytest.raises(ValueError):
        DetectionNoise(0.0, 0.0, 0.0, (0.9, 0.1))


def test_detector_picks_nearest():
    near = ObstacleSpec.of_class("cube", 2.0, 0.0)
    far = ObstacleSpec.of_class("large", 4.0, 0.0)
    det, gt = Detector(CAM65).detect(Pose2D(0, 0, 0), [far, near], np.random.default_rng(0))
    assert gt.obstacle_id == ObstacleClass.CUBE
    assert det == gt
    assert det.box.to_dict() == BoundingBox.from_dict(det.box.to_dict()).to_dict()
    assert Detection.from_dict(det.to_dict()) == det
