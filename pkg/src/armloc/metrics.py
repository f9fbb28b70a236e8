"""PCK and arm-angle detection-rate curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

from .core import JOINTS, ArmClass, FrameAnnotation, arm_angle, part_name, wrap_degrees

ALL = "all"

# Detections are looked up as detections[frame_id][arm] -> object with
# .present, .wrist, .elbow, .angle_deg (associate.ArmDetection fits).
Detections = Mapping[str, Mapping[ArmClass, object]]


@dataclass(frozen=True)
class EvalCurve:
    thresholds: tuple
    detection_rate: tuple
    n_samples: int

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        r = np.asarray(self.detection_rate, dtype=np.float64)
        if t.shape != r.shape:
            raise ValueError("thresholds and rates differ in length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly ascending")
        if np.any(np.diff(r) < 0) or np.any((r < 0) | (r > 1)):
            raise ValueError("detection rates must be non-decreasing within [0, 1]")

    def rate_at(self, threshold: float) -> float:
        t = np.asarray(self.thresholds)
        i = np.flatnonzero(np.isclose(t, threshold, rtol=0, atol=1e-12))
        if i.size == 0:
            raise KeyError(f"threshold {threshold} not on curve")
        return float(self.detection_rate[i[0]])


def _curve(errors: Sequence[float], thresholds: Sequence[float]) -> EvalCurve:
    errs = np.asarray(errors, dtype=np.float64)
    t = np.asarray(thresholds, dtype=np.float64)
    if errs.size == 0:
        raise ValueError("no samples")
    # missing detections are +inf and fail every threshold
    rates = (errs[None, :] <= t[:, None]).mean(axis=1)
    return EvalCurve(tuple(t.tolist()), tuple(rates.tolist()), int(errs.size))


def average_arm_length(frames: Iterable[FrameAnnotation]) -> float:
    """Mean wrist-elbow distance over all visible annotated arms (input pixels)."""
    lengths = [a.length for f in frames for a in f.arms if a.visible]
    if not lengths:
        raise ValueError("no visible arms to average")
    return math.fsum(lengths) / len(lengths)


def ground_truth_angle(wrist: Sequence[float], elbow: Sequence[float]) -> float:
    """Full-quadrant elbow-to-wrist angle in degrees, in (-180, 180]."""
    return arm_angle(wrist, elbow)


def angle_difference(a, b):
    """Absolute difference on the circle, in [0, 180]."""
    return np.abs(wrap_degrees(np.asarray(a) - np.asarray(b)))


def _lookup(detections: Detections, frame_id: str, arm: ArmClass):
    det = detections.get(frame_id, {}).get(arm)
    if det is None or not det.present:
        return None
    return det


def joint_errors(detections: Detections, ground_truth: Iterable[FrameAnnotation]) -> Dict[str, list]:
    """Localization error (input pixels, inf when missed) per part name."""
    errors: Dict[str, list] = {}
    for frame in ground_truth:
        for ann in frame.arms:
            if not ann.visible:
                continue
            det = _lookup(detections, frame.frame_id, ann.arm)
            for joint in JOINTS:
                gt = ann.joint(joint)
                if det is None:
                    e = math.inf
                else:
                    p = getattr(det, joint)
                    e = math.hypot(p[0] - gt[0], p[1] - gt[1])
                errors.setdefault(part_name(ann.arm, joint), []).append(e)
    return errors


def pck_curve(detections: Detections, ground_truth: Sequence[FrameAnnotation],
              norm_length: float, thresholds: Sequence[float]) -> Dict[str, EvalCurve]:
    """Per-part PCK curves plus an ``"all"`` curve pooling every part.

    A joint counts as correct at threshold ``t`` when its error is at most
    ``t * norm_length``. Parts with no ground truth are omitted.
    """
    if norm_length <= 0:
        raise ValueError("norm_length must be > 0")
    errors = joint_errors(detections, ground_truth)
    if not errors:
        raise ValueError("empty ground truth")
    t = np.asarray(thresholds, dtype=np.float64) * norm_length
    curves = {}
    for arm in ArmClass:
        for joint in JOINTS:
            name = part_name(arm, joint)
            if name in errors:
                c = _curve(errors[name], t)
                curves[name] = EvalCurve(tuple(thresholds), c.detection_rate, c.n_samples)
    pooled = [e for v in errors.values() for e in v]
    c = _curve(pooled, t)
    curves[ALL] = EvalCurve(tuple(thresholds), c.detection_rate, c.n_samples)
    return curves


def angle_errors(detections: Detections, ground_truth: Iterable[FrameAnnotation],
                 min_arm_length: float = 0.0) -> Dict[str, list]:
    errors: Dict[str, list] = {}
    for frame in ground_truth:
        for ann in frame.arms:
            if not ann.visible or ann.length < min_arm_length:
                continue
            det = _lookup(detections, frame.frame_id, ann.arm)
            gt = ground_truth_angle(ann.wrist, ann.elbow)
            e = math.inf if det is None else float(angle_difference(det.angle_deg, gt))
            errors.setdefault(ann.arm.name, []).append(e)
    return errors


def angle_curve(detections: Detections, ground_truth: Sequence[FrameAnnotation],
                thresholds_deg: Sequence[float], min_arm_length: float = 0.0) -> Dict[str, EvalCurve]:
    """Per-arm angle detection-rate curves plus an ``"all"`` curve.

    Arms shorter than ``min_arm_length`` input pixels are excluded.
    """
    errors = angle_errors(detections, ground_truth, min_arm_length)
    if not errors:
        raise ValueError("empty ground truth")
    curves = {arm.name: _curve(errors[arm.name], thresholds_deg)
              for arm in ArmClass if arm.name in errors}
    curves[ALL] = _curve([e for v in errors.values() for e in v], thresholds_deg)
    return curves
