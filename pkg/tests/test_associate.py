import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from armloc.associate import (
    PAF,
    PCM,
    OccupancyMap,
    accumulate_occupancy,
    detect_arms,
    extrapolate_hand,
    score_arm,
    select_joint,
)
from armloc.core import ArmClass, FrameAnnotation, HeatmapStack, JointAnnotation, PipelineConfig
from armloc.extract import PafCandidate, PcmCandidate
from armloc.labelgen import render_pcm, render_stack

CFG = PipelineConfig()


def _paf(wrist=(10.0, 0.0), elbow=(0.0, 0.0), score=1.0, lam_s=0.5):
    return PafCandidate(centroid=(5.0, 0.0), major_axis_len=13.0, normal=(1.0, 0.0),
                        angle_deg=0.0, score=score, wrist_est=wrist, elbow_est=elbow,
                        est_score=lam_s * score)


def test_select_joint_pcm_beats_estimate():
    loc, f, src = select_joint((10, 10), 0.5, [PcmCandidate((11, 10), 0.9, 4)], sigma_s=2.5)
    assert src == PCM and loc == (11, 10)
    assert f == pytest.approx(0.9 * math.exp(-1 / 6.25))


def test_select_joint_far_pcm_loses():
    loc, f, src = select_joint((10, 10), 0.5, [PcmCandidate((20, 10), 0.9, 4)], sigma_s=2.5)
    assert src == PAF and loc == (10, 10) and f == 0.5


def test_select_joint_no_candidates():
    assert select_joint((1, 2), 0.4, [], sigma_s=4.0) == ((1, 2), 0.4, PAF)


def test_select_joint_tie_prefers_pcm_then_lowest_index():
    cands = [PcmCandidate((3, 0), 0.5, 1), PcmCandidate((0, 0), 0.5, 1), PcmCandidate((0, 0), 0.5, 1)]
    loc, f, src = select_joint((0, 0), 0.5, cands, sigma_s=2.0)
    assert src == PCM and loc == (0, 0) and f == 0.5


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20), st.floats(0.01, 1)), max_size=6),
       st.floats(0, 1), st.floats(0.5, 8))
def test_select_joint_is_argmax(cands, est_score, sigma):
    pcm = [PcmCandidate((x, y), s, 1) for x, y, s in cands]
    loc, f, src = select_joint((0.0, 0.0), est_score, pcm, sigma)
    best = max([est_score] + [c.score * math.exp(-(c.location[0] ** 2 + c.location[1] ** 2) / sigma ** 2)
                              for c in pcm])
    assert f == pytest.approx(best, rel=1e-12)


def test_score_arm_totals():
    arm = ArmClass.DriverLeft
    w = [PcmCandidate((10.0, 0.0), 1.0, 3)]
    e = [PcmCandidate((0.0, 0.0), 0.5, 3)]
    det = score_arm(arm, _paf(), w, e, CFG)
    assert (det.S_a, det.S_w, det.S_e) == (1.0, 1.0, 0.5)
    assert det.S_total == pytest.approx(0.8333, abs=1e-4)
    det = score_arm(arm, _paf(score=0.6, lam_s=0.1), [PcmCandidate((10.0, 0.0), 0.4, 1)],
                    [PcmCandidate((0.0, 0.0), 0.2, 1)], CFG)
    assert det.S_total == pytest.approx(0.4)
    assert det.wrist == (83.5, 3.5) and det.elbow == (3.5, 3.5)


def _frame(arms, size=(320, 160)):
    return FrameAnnotation("f", size, tuple(arms))


def test_missing_side_not_present(backend):
    f = _frame([JointAnnotation(ArmClass.DriverLeft, (120, 80), (60, 60)),
                JointAnnotation(ArmClass.DriverRight, (200, 40), (180, 100))])
    dets = detect_arms(render_stack(f), CFG)
    assert len(dets) == 4
    assert dets[ArmClass.DriverLeft].present and dets[ArmClass.DriverRight].present
    assert not dets[ArmClass.PassengerLeft].present
    assert not dets[ArmClass.PassengerRight].present


def test_four_arm_roundtrip(backend):
    arms = [JointAnnotation(ArmClass.DriverLeft, (120, 80), (60, 60)),
            JointAnnotation(ArmClass.DriverRight, (200, 40), (180, 100)),
            JointAnnotation(ArmClass.PassengerLeft, (40, 130), (100, 120)),
            JointAnnotation(ArmClass.PassengerRight, (260, 60), (290, 130))]
    f = _frame(arms)
    dets = detect_arms(render_stack(f), CFG)
    for a in arms:
        d = dets[a.arm]
        assert d.present and d.wrist_source == PCM and d.elbow_source == PCM
        assert math.dist(d.wrist, a.wrist) < 0.05 * a.length
        assert math.dist(d.elbow, a.elbow) < 0.05 * a.length


def test_spurious_weak_region_loses(backend):
    arm = JointAnnotation(ArmClass.DriverLeft, (120, 80), (40, 80))
    stack = render_stack(_frame([arm]))
    data = stack.data.copy()
    data[8, 3:6, 30:36] = 0.2  # weak PAF blob away from the arm
    data[2 * 0 + 1] = np.maximum(data[1], 0.2 * render_pcm((34, 4), data.shape[::-1][:2], 1.5))
    dets = detect_arms(HeatmapStack(data), CFG)
    d = dets[ArmClass.DriverLeft]
    assert d.S_a == pytest.approx(1.0, abs=1e-6)
    assert math.dist(d.wrist, arm.wrist) < 4


def test_below_presence_threshold():
    data = np.zeros((17, 20, 30), np.float32)
    data[8, 5:8, 5:15] = 0.15
    dets = detect_arms(HeatmapStack(data), CFG)
    # S_total = (0.15 + 0.075 + 0.075) / 3 = 0.1
    assert not dets[ArmClass.DriverLeft].present
    dets = detect_arms(HeatmapStack(data), CFG.updated({"presence_threshold": 0.05}))
    assert dets[ArmClass.DriverLeft].present


def test_scale_equivariance(backend):
    f = _frame([JointAnnotation(ArmClass.DriverLeft, (120, 80), (60, 60))])
    d1 = detect_arms(render_stack(f))[ArmClass.DriverLeft]
    g = FrameAnnotation("g", (640, 320), (JointAnnotation(ArmClass.DriverLeft, (243.5, 163.5), (123.5, 123.5)),))
    d2 = detect_arms(render_stack(g))[ArmClass.DriverLeft]
    assert abs(d1.angle_deg - d2.angle_deg) < 1.0


def test_extrapolate_hand():
    assert extrapolate_hand((10, 0), (0, 0), 0.25) == (12.5, 0)
    assert extrapolate_hand((4, 6), (0, 2), 0.25) == (5, 7)
    with pytest.raises(ValueError):
        extrapolate_hand((1, 1), (1, 1))


def test_occupancy_mass_and_filter():
    occ = OccupancyMap(200, 100, splat_sigma=5.0, mode_filter="manual")
    assert occ.accumulate((100, 50), "manual")
    assert not occ.accumulate((100, 50), "autonomous")
    assert not occ.accumulate((-5, 50), "manual")
    assert occ.count == 1
    assert occ.grid.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.unravel_index(occ.grid.argmax(), occ.grid.shape) == (50, 100)


def test_occupancy_repeated_point_scales_peak():
    one = OccupancyMap(64, 64, 3.0)
    many = OccupancyMap(64, 64, 3.0)
    one.accumulate((30, 30))
    for _ in range(7):
        accumulate_occupancy(many, (30, 30))
    assert many.grid.max() == pytest.approx(7 * one.grid.max())


def test_occupancy_order_independent_and_merge():
    pts = [(10, 12), (40.5, 3), (22, 30.25)]
    grids = []
    for order in permutations(pts):
        occ = OccupancyMap(50, 40, 4.0)
        for p in order:
            occ.accumulate(p)
        grids.append(occ.grid)
    for g in grids[1:]:
        np.testing.assert_allclose(g, grids[0], atol=1e-12)
    a, b = OccupancyMap(50, 40, 4.0), OccupancyMap(50, 40, 4.0)
    a.accumulate(pts[0])
    b.accumulate(pts[1])
    b.accumulate(pts[2])
    m = a.merge(b)
    assert m.count == 3
    np.testing.assert_allclose(m.grid, grids[0], atol=1e-12)
    with pytest.raises(ValueError):
        a.merge(OccupancyMap(10, 10))


def test_occupancy_validation():
    with pytest.raises(ValueError):
        OccupancyMap(10, 10, splat_sigma=0)
    with pytest.raises(ValueError):
        OccupancyMap(10, 10, mode_filter="parked")
