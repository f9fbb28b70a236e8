import math

import pytest
from hypothesis import given, strategies as st

from armloc.core import (
    N_CHANNELS,
    ArmClass,
    FrameAnnotation,
    HeatmapStack,
    JointAnnotation,
    PipelineConfig,
    arm_angle,
    heatmap_to_input_coords,
    input_to_heatmap_cell,
    input_to_heatmap_coords,
    mirror,
    wrap_degrees,
)
import numpy as np


def test_channel_layout_covers_17_channels_once():
    chans = []
    for arm in ArmClass:
        chans += [arm.elbow_channel, arm.wrist_channel, *arm.paf_channels]
    assert sorted(chans) == list(range(16))
    assert N_CHANNELS == 17


def test_mirror_table():
    assert mirror(ArmClass.DriverLeft) is ArmClass.PassengerRight
    assert mirror(ArmClass.DriverRight) is ArmClass.PassengerLeft
    assert mirror(ArmClass.PassengerLeft) is ArmClass.DriverRight
    assert mirror(ArmClass.PassengerRight) is ArmClass.DriverLeft


@pytest.mark.parametrize("arm", list(ArmClass))
def test_mirror_is_involution_and_swaps_side(arm):
    assert mirror(mirror(arm)) is arm
    assert mirror(arm).is_driver != arm.is_driver


@pytest.mark.parametrize("p, stride, expected", [
    ((0, 0), 8, (3.5, 3.5)),
    ((10, 5), 1, (10, 5)),
    ((91, 45), 8, (731.5, 363.5)),
])
def test_heatmap_to_input(p, stride, expected):
    assert heatmap_to_input_coords(p, stride) == expected


@given(st.integers(-50, 500), st.integers(-50, 500), st.integers(1, 16))
def test_cell_round_trip(x, y, stride):
    q = heatmap_to_input_coords((x, y), stride)
    assert input_to_heatmap_cell(q, stride) == (x, y)
    assert input_to_heatmap_coords(q, stride) == pytest.approx((x, y))


def test_input_pixels_land_in_their_cell():
    for i in range(64):
        assert input_to_heatmap_cell((i, i), 8) == (i // 8, i // 8)


def test_bad_stride():
    with pytest.raises(ValueError):
        heatmap_to_input_coords((0, 0), 0)


def test_arm_angle_convention():
    # wrist below the elbow in y-down coordinates -> positive angle
    assert arm_angle((0, 1), (0, 0)) == 90.0
    assert arm_angle((-1, 0), (0, 0)) == 180.0
    with pytest.raises(ValueError):
        arm_angle((1, 1), (1, 1))


@given(st.floats(-1e4, 1e4))
def test_wrap_degrees_range(a):
    w = wrap_degrees(a)
    assert -180 < w <= 180
    assert math.isclose(math.cos(math.radians(w)), math.cos(math.radians(a)), abs_tol=1e-9)


def test_joint_annotation_validation():
    with pytest.raises(ValueError):
        JointAnnotation(ArmClass.DriverLeft, (1, 1), (1, 1))
    # invisible joints may coincide
    JointAnnotation(ArmClass.DriverLeft, (1, 1), (1, 1), visible=False)


def test_frame_rejects_duplicate_classes():
    a = JointAnnotation(ArmClass.DriverLeft, (10, 10), (0, 0))
    with pytest.raises(ValueError):
        FrameAnnotation("f", (64, 64), (a, a))
    with pytest.raises(ValueError):
        FrameAnnotation("f", (64, 64), (), drive_mode="cruise")


def test_heatmap_stack_shape_and_ranges():
    with pytest.raises(ValueError):
        HeatmapStack(np.zeros((16, 4, 4)))
    s = HeatmapStack(np.zeros((17, 4, 5)))
    assert (s.width, s.height) == (5, 4)
    s.check_ranges()
    bad = np.zeros((17, 4, 5))
    bad[8, 0, 0] = bad[9, 0, 0] = 0.8
    with pytest.raises(ValueError, match="magnitude"):
        HeatmapStack(bad).check_ranges()


def test_config_defaults_and_validation():
    c = PipelineConfig()
    assert (c.tau_pcm, c.tau_paf, c.lambda_a, c.lambda_s, c.lambda_h) == (0.1, 0.1, 0.75, 0.5, 0.25)
    with pytest.raises(ValueError):
        PipelineConfig(tau_pcm=1.0)
    with pytest.raises(ValueError):
        PipelineConfig(lambda_a=2.5)
    with pytest.raises(ValueError):
        c.updated({"nope": 1})
    assert c.updated({"sigma_s": 3}).sigma_s == 3.0
