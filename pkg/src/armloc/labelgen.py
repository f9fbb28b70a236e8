"""Ground-truth heatmap rendering: part confidence maps, affinity fields, background."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    N_CHANNELS,
    BACKGROUND_CHANNEL,
    ArmClass,
    FrameAnnotation,
    HeatmapStack,
    PipelineConfig,
    input_to_heatmap_coords,
)


@dataclass(frozen=True)
class PafMembershipParams:
    sigma_paf: float = 1.0

    def __post_init__(self):
        if not self.sigma_paf > 0:
            raise ValueError("sigma_paf must be > 0")


def _check_canvas(canvas: Sequence[int]) -> Tuple[int, int]:
    w, h = int(canvas[0]), int(canvas[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"zero-area canvas {canvas}")
    return w, h


def render_pcm(part: Optional[Sequence[float]], canvas: Sequence[int], sigma_pcm: float) -> np.ndarray:
    """Gaussian blob ``exp(-|x - p|^2 / sigma^2)`` centred on ``part``.

    ``part`` is in heatmap pixels; ``None`` (joint not visible) gives an
    all-zero plane. Note the denominator is ``sigma^2``, not ``2 sigma^2``.
    """
    w, h = _check_canvas(canvas)
    if not sigma_pcm > 0:
        raise ValueError("sigma_pcm must be > 0")
    if part is None:
        return np.zeros((h, w))
    s2 = sigma_pcm * sigma_pcm
    gx = np.exp(-(np.arange(w) - part[0]) ** 2 / s2)
    gy = np.exp(-(np.arange(h) - part[1]) ** 2 / s2)
    return np.outer(gy, gx)


def render_paf(elbow: Sequence[float], wrist: Sequence[float], canvas: Sequence[int],
               params: PafMembershipParams = PafMembershipParams()):
    """Unit elbow-to-wrist vector on every pixel of the arm's band, zero elsewhere.

    A pixel belongs to the arm when its projection onto the arm direction,
    measured from the elbow, lies in ``[0, length]`` and its perpendicular
    distance to the arm line is at most ``sigma_paf``.
    """
    w, h = _check_canvas(canvas)
    d = np.array([wrist[0] - elbow[0], wrist[1] - elbow[1]], dtype=np.float64)
    length = float(np.hypot(d[0], d[1]))
    if length == 0.0:
        raise ValueError("degenerate arm: wrist == elbow")
    vx, vy = d / length
    xs = np.arange(w)[None, :] - elbow[0]
    ys = np.arange(h)[:, None] - elbow[1]
    along = vx * xs + vy * ys
    perp = np.abs(-vy * xs + vx * ys)
    on_arm = (along >= 0) & (along <= length) & (perp <= params.sigma_paf)
    return np.where(on_arm, vx, 0.0), np.where(on_arm, vy, 0.0)


def render_background(pcms) -> np.ndarray:
    """``1 - max`` over the PCM planes, clamped to [0, 1]; keeps the input dtype."""
    planes = [np.asarray(p) for p in pcms]
    if not planes:
        raise ValueError("no PCM planes")
    shape = planes[0].shape
    if any(p.shape != shape for p in planes):
        raise ValueError("PCM planes differ in size")
    stacked = np.stack(planes)
    one = stacked.dtype.type(1)
    return np.clip(one - stacked.max(axis=0), 0, 1)


def render_stack(frame: FrameAnnotation, config: PipelineConfig = PipelineConfig()) -> HeatmapStack:
    """Render the full 17-channel ground-truth stack for one frame."""
    w, h = frame.heatmap_size
    canvas = (w, h)
    data = np.zeros((N_CHANNELS, h, w), dtype=np.float32)
    params = PafMembershipParams(config.sigma_paf)
    for arm in ArmClass:
        ann = frame.get(arm)
        if ann is None or not ann.visible:
            continue
        elbow = input_to_heatmap_coords(ann.elbow)
        wrist = input_to_heatmap_coords(ann.wrist)
        data[arm.elbow_channel] = render_pcm(elbow, canvas, config.sigma_pcm)
        data[arm.wrist_channel] = render_pcm(wrist, canvas, config.sigma_pcm)
        cx, cy = arm.paf_channels
        px, py = render_paf(elbow, wrist, canvas, params)
        data[cx] = px
        data[cy] = py
    data[BACKGROUND_CHANNEL] = render_background(data[:8])
    return HeatmapStack(data)
