"""Training-image augmentation: symmetry mirroring, cloud lighting, geometric jitter.

Images are float arrays in [0, 1], either ``(h, w)`` or ``(h, w, c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage as ndi

from .core import FrameAnnotation, JointAnnotation, mirror
from .noise import fractal_noise

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
LIGHTING_CEILING = 1.4
DEFAULT_BLUR_SIGMA = 10.0


@dataclass(frozen=True)
class LightingRange:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= LIGHTING_CEILING):
            raise ValueError(f"invalid lighting range [{self.lo}, {self.hi}]")


LIGHTING_CONDITIONS = {
    "bright": LightingRange(0.4, 1.4),
    "dark": LightingRange(0.05, 0.4),
    "average": LightingRange(0.3, 0.7),
}


@dataclass(frozen=True)
class GeometricAugmentParams:
    max_rotation_deg: float = 20.0
    crop_w: int = 736
    crop_h: int = 368
    scale_min: float = 0.7
    scale_max: float = 1.2
    random_offset: bool = False

    def __post_init__(self):
        if self.scale_min > self.scale_max or self.scale_min <= 0:
            raise ValueError("need 0 < scale_min <= scale_max")
        if self.crop_w <= 0 or self.crop_h <= 0:
            raise ValueError("crop dimensions must be positive")
        if self.max_rotation_deg < 0:
            raise ValueError("max_rotation_deg must be >= 0")


# --------------------------------------------------------------------------
# symmetry mirror

def mirror_symmetry(image: np.ndarray, frame: FrameAnnotation, side: str):
    """Reflect the annotated half of the cabin onto the other half.

    ``side`` names the half to keep (``"driver"`` is the left half). The
    result is a driver-driver or passenger-passenger cabin whose mirrored
    annotations use ``x' = (width - 1) - x`` and the mirrored arm class, so
    the left half stays labeled driver and the right half passenger. With an
    odd width the centre column maps onto itself.
    """
    if side not in ("driver", "passenger"):
        raise ValueError(f"side must be 'driver' or 'passenger', got {side!r}")
    image = np.asarray(image)
    w = image.shape[1]
    if frame.image_size[0] != w:
        raise ValueError("annotation width does not match image width")
    kept = [a for a in frame.arms if a.arm.is_driver == (side == "driver")]
    if not kept:
        raise ValueError(f"frame {frame.frame_id} has no {side} annotations to mirror")

    half = w // 2
    out = image.copy()
    if side == "driver":
        out[:, w - half:] = image[:, :half][:, ::-1]
    else:
        out[:, :half] = image[:, w - half:][:, ::-1]

    arms = list(kept)
    for a in kept:
        arms.append(JointAnnotation(
            arm=mirror(a.arm),
            wrist=((w - 1) - a.wrist[0], a.wrist[1]),
            elbow=((w - 1) - a.elbow[0], a.elbow[1]),
            visible=a.visible,
        ))
    arms.sort(key=lambda a: a.arm)
    return out, FrameAnnotation(frame.frame_id, frame.image_size, tuple(arms), frame.drive_mode)


# --------------------------------------------------------------------------
# lighting

def overlay_blend(base: np.ndarray, overlay: np.ndarray) -> np.ndarray:
    """Overlay blend: multiply below 0.5, screen above; result clamped to [0, 1]."""
    base = np.asarray(base, dtype=np.float64)
    overlay = np.asarray(overlay, dtype=np.float64)
    if base.shape != overlay.shape:
        try:
            overlay = np.broadcast_to(overlay, base.shape)
        except ValueError:
            raise ValueError(f"shape mismatch: {base.shape} vs {overlay.shape}") from None
    low = 2.0 * base * overlay
    high = 1.0 - 2.0 * (1.0 - base) * (1.0 - overlay)
    return np.clip(np.where(base <= 0.5, low, high), 0.0, 1.0)


def cloud_texture(size: Tuple[int, int], seed: int, value_range: LightingRange,
                  blur_sigma: float = DEFAULT_BLUR_SIGMA, octaves: int = 5) -> np.ndarray:
    """Blurred fractal value noise rescaled so its min is ``lo`` and max is ``hi``.

    Values above 1 are kept; clipping happens in the blend.
    """
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValueError(f"invalid texture size {size}")
    if not isinstance(value_range, LightingRange):
        value_range = LightingRange(*value_range)
    rng = np.random.default_rng(seed)
    tex = fractal_noise(h, w, rng, octaves=octaves)
    if blur_sigma > 0:
        tex = ndi.gaussian_filter(tex, blur_sigma, mode="reflect")
    lo, hi = tex.min(), tex.max()
    if hi == lo:
        return np.full((h, w), value_range.lo)
    unit = (tex - lo) / (hi - lo)
    return value_range.lo + (value_range.hi - value_range.lo) * unit


def lighting_augment(image: np.ndarray, condition: str, seed: int,
                     blur_sigma: float = DEFAULT_BLUR_SIGMA) -> np.ndarray:
    if condition not in LIGHTING_CONDITIONS:
        raise ValueError(f"condition must be one of {sorted(LIGHTING_CONDITIONS)}")
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    tex = cloud_texture((w, h), seed, LIGHTING_CONDITIONS[condition], blur_sigma)
    if image.ndim == 3:
        tex = tex[:, :, None]
    return overlay_blend(image, np.broadcast_to(tex, image.shape))


def to_grayscale_3ch(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) image, got {rgb.shape}")
    luma = rgb @ np.array(LUMA_WEIGHTS)
    return np.repeat(luma[:, :, None], 3, axis=2)


# --------------------------------------------------------------------------
# geometric

def sample_geometric(params: GeometricAugmentParams, seed: int):
    """Draw ``(rotation_deg, scale, offset_xy)`` exactly as geometric_augment does."""
    rng = np.random.default_rng(seed)
    rot = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg)
    scale = rng.uniform(params.scale_min, params.scale_max)
    u = rng.uniform(-1.0, 1.0, size=2)
    return float(rot), float(scale), u


def similarity_matrix(rotation_deg: float, scale: float,
                      center_in, center_out) -> Tuple[np.ndarray, np.ndarray]:
    """Forward map ``p -> A @ p + b`` rotating/scaling about ``center_in``."""
    t = math.radians(rotation_deg)
    c, s = math.cos(t), math.sin(t)
    A = scale * np.array([[c, -s], [s, c]])
    b = np.asarray(center_out, dtype=np.float64) - A @ np.asarray(center_in, dtype=np.float64)
    return A, b


def _warp(image: np.ndarray, A: np.ndarray, b: np.ndarray, out_hw: Tuple[int, int]) -> np.ndarray:
    inv = np.linalg.inv(A)
    # scipy works in (row, col) = (y, x) order
    swap = np.array([[0, 1], [1, 0]])
    m = swap @ inv @ swap
    off = swap @ (-inv @ b)
    if image.ndim == 2:
        return ndi.affine_transform(image, m, off, output_shape=out_hw, order=1,
                                    mode="constant", cval=0.0)
    return np.stack([ndi.affine_transform(image[..., k], m, off, output_shape=out_hw,
                                          order=1, mode="constant", cval=0.0)
                     for k in range(image.shape[2])], axis=-1)


def geometric_augment(image: np.ndarray, frame: FrameAnnotation,
                      params: GeometricAugmentParams, seed: int, *,
                      rotation_deg: Optional[float] = None, scale: Optional[float] = None):
    """Random rotation and scale about the image centre, then a crop to the target size.

    ``rotation_deg``/``scale`` override the sampled values. Joints landing
    outside the crop are marked not visible.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    rot_s, scale_s, u = sample_geometric(params, seed)
    rot = rot_s if rotation_deg is None else rotation_deg
    sc = scale_s if scale is None else scale
    cw, ch = params.crop_w, params.crop_h
    c_in = ((w - 1) / 2.0, (h - 1) / 2.0)
    c_out = np.array([(cw - 1) / 2.0, (ch - 1) / 2.0])
    if params.random_offset:
        slack = np.maximum(0.0, (np.array([w, h]) * sc - np.array([cw, ch])) / 2.0)
        c_out = c_out + u * slack
    A, b = similarity_matrix(rot, sc, c_in, c_out)

    if rot == 0 and sc == 1 and (cw, ch) == (w, h) and np.allclose(c_out, c_in):
        out = image.copy()
    else:
        out = _warp(image, A, b, (ch, cw))

    arms = []
    for a in frame.arms:
        wr = tuple(A @ np.asarray(a.wrist) + b)
        el = tuple(A @ np.asarray(a.elbow) + b)
        ann = JointAnnotation(a.arm, wr, el, visible=False)
        visible = a.visible and ann.in_bounds(cw, ch)
        arms.append(JointAnnotation(a.arm, wr, el, visible=visible))
    return out, FrameAnnotation(frame.frame_id, (cw, ch), tuple(arms), frame.drive_mode)
