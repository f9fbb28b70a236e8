"""Seeded synthetic frames for round-trip testing of the decoder.

Each frame carries all four arms. Elbows are uniform over the central 80% of
the image, arm length uniform in [40, 160] input pixels and direction
uniform on the circle; a draw is repeated until the wrist also lands in the
central 80%, which keeps every PCM blob clear of the image border.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import N_PCM, N_PAF, ArmClass, FrameAnnotation, HeatmapStack, JointAnnotation, PipelineConfig
from .labelgen import render_stack

DEFAULT_IMAGE_SIZE = (736, 368)
ARM_LENGTH_RANGE = (40.0, 160.0)
CENTRAL_FRACTION = 0.8


def frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _sample_arm(rng: np.random.Generator, arm: ArmClass, w: int, h: int) -> JointAnnotation:
    mx = (1 - CENTRAL_FRACTION) / 2 * w
    my = (1 - CENTRAL_FRACTION) / 2 * h
    while True:
        ex = rng.uniform(mx, w - mx)
        ey = rng.uniform(my, h - my)
        length = rng.uniform(*ARM_LENGTH_RANGE)
        theta = rng.uniform(-math.pi, math.pi)
        wx = ex + length * math.cos(theta)
        wy = ey + length * math.sin(theta)
        if mx <= wx <= w - mx and my <= wy <= h - my:
            return JointAnnotation(arm, (wx, wy), (ex, ey))


def synth_frame(seed: int, index: int, image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
                arms: Sequence[ArmClass] = tuple(ArmClass)) -> FrameAnnotation:
    rng = frame_rng(seed, index)
    w, h = image_size
    mode = "autonomous" if rng.random() < 0.5 else "manual"
    anns = tuple(_sample_arm(rng, a, w, h) for a in arms)
    return FrameAnnotation(f"synth_{seed}_{index:06d}", (w, h), anns, mode)


def synth_frames(n: int, seed: int, image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE) -> List[FrameAnnotation]:
    return [synth_frame(seed, i, image_size) for i in range(n)]


def add_noise(stack: HeatmapStack, sigma: float, rng: np.random.Generator) -> HeatmapStack:
    """Additive zero-mean Gaussian noise on all 17 channels, then projection
    back into the valid ranges (confidence planes clipped to [0, 1], PAF
    vectors clipped to [-1, 1] per component and to unit length)."""
    if sigma < 0:
        raise ValueError("noise sigma must be >= 0")
    data = stack.data.astype(np.float64)
    if sigma > 0:
        data = data + rng.normal(0.0, sigma, size=data.shape)
    data[:N_PCM] = np.clip(data[:N_PCM], 0.0, 1.0)
    data[-1] = np.clip(data[-1], 0.0, 1.0)
    paf = np.clip(data[N_PCM:N_PCM + N_PAF], -1.0, 1.0)
    mag = np.hypot(paf[0::2], paf[1::2])
    scale = np.where(mag > 1.0, 1.0 / np.maximum(mag, 1e-300), 1.0)
    paf[0::2] *= scale
    paf[1::2] *= scale
    data[N_PCM:N_PCM + N_PAF] = paf
    out = data.astype(np.float32)
    return HeatmapStack(out)


def synth_stack(frame: FrameAnnotation, config: PipelineConfig = PipelineConfig(),
                noise_sigma: float = 0.0, rng: Optional[np.random.Generator] = None) -> HeatmapStack:
    stack = render_stack(frame, config)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("a generator is required for noisy stacks")
        stack = add_noise(stack, noise_sigma, rng)
    return stack


def noise_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, 1])
