"""Decode heatmap planes into joint candidates (PCMs) and arm candidates (PAFs)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import _kernels as K
from .core import Point, PipelineConfig

# One twelfth of a pixel squared: variance of a unit-width uniform pixel footprint.
PIXEL_VARIANCE = 1.0 / 12.0
_ISOTROPY_RTOL = 1e-12


@dataclass(frozen=True)
class PcmCandidate:
    location: Point
    score: float
    region_size: int


@dataclass(frozen=True)
class PafCandidate:
    """One arm hypothesis from a thresholded PAF magnitude region (heatmap pixels)."""

    centroid: Point
    major_axis_len: float
    normal: Point
    angle_deg: float
    score: float
    wrist_est: Point
    elbow_est: Point
    est_score: float
    region_size: int = 0


def connected_components(binary: np.ndarray, connectivity: int = 8):
    """Label 8- (or 4-) connected foreground regions; returns ``(labels, count)``.

    Labels run 1..count in the raster order of each region's first pixel.
    """
    return K.label(np.asarray(binary, dtype=bool), connectivity)


def region_props_pcm(image: np.ndarray, labels: np.ndarray, label: int) -> PcmCandidate:
    """Intensity-weighted centroid and peak intensity of one labeled region."""
    ys, xs = np.nonzero(labels == label)
    if xs.size == 0:
        raise ValueError(f"label {label} has no pixels")
    w = np.asarray(image, dtype=np.float64)[ys, xs]
    total = w.sum()
    if total > 0:
        loc = (float((w * xs).sum() / total), float((w * ys).sum() / total))
    else:
        loc = (float(xs.mean()), float(ys.mean()))
    return PcmCandidate(loc, float(w.max()), int(xs.size))


def ellipse_from_moments(mxx: float, myy: float, mxy: float, count: int) -> Tuple[float, float]:
    """``(major_axis_len, orientation_deg)`` of the moment ellipse.

    Moments are population central moments of pixel centres; each axis gets
    the 1/12 pixel-footprint correction. Orientation is in (-90, 90] degrees
    in y-down image coordinates; isotropic regions report 0. Single-pixel
    regions are degenerate and report a zero-length axis.
    """
    if count <= 1:
        return 0.0, 0.0
    a = mxx + PIXEL_VARIANCE
    c = myy + PIXEL_VARIANCE
    b = mxy
    half_diff = 0.5 * (a - c)
    r = math.hypot(half_diff, b)
    lam_max = 0.5 * (a + c) + r
    if r <= _ISOTROPY_RTOL * (a + c):
        return 4.0 * math.sqrt(lam_max), 0.0
    orient = 0.5 * math.degrees(math.atan2(2.0 * b, a - c))
    if orient <= -90.0:
        orient += 180.0
    return 4.0 * math.sqrt(lam_max), orient


def region_props_ellipse(labels: np.ndarray, label: int) -> Tuple[Point, float, float]:
    """``(centroid, major_axis_len, orientation_deg)`` from unweighted pixel moments."""
    ys, xs = np.nonzero(labels == label)
    if xs.size == 0:
        raise ValueError(f"label {label} has no pixels")
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    cx, cy = xs.mean(), ys.mean()
    dx, dy = xs - cx, ys - cy
    length, orient = ellipse_from_moments((dx * dx).mean(), (dy * dy).mean(),
                                          (dx * dy).mean(), xs.size)
    return (float(cx), float(cy)), length, orient


# --------------------------------------------------------------------------
# whole-plane decoding; the array forms feed associate without building
# per-candidate objects

def decode_pcm(pcm: np.ndarray, tau: float):
    """Candidates of one PCM plane as ``(locations (n, 2), scores (n,), sizes (n,))``.

    Sorted by descending score, ties in label order.
    """
    labels, n = K.label(pcm > tau, 8)
    if n == 0:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=np.int64)
    st = K.region_stats(labels, n, pcm)
    wsum = st[:, K.WSUM]
    with np.errstate(invalid="ignore", divide="ignore"):
        loc = np.where(wsum[:, None] > 0,
                       st[:, [K.WX, K.WY]] / wsum[:, None],
                       st[:, [K.CX, K.CY]])
    score = st[:, K.WMAX]
    order = np.argsort(-score, kind="stable")
    return loc[order], score[order], st[order, K.COUNT].astype(np.int64)


def decode_paf(paf_x: np.ndarray, paf_y: np.ndarray, config: PipelineConfig) -> dict:
    """Arm candidates of one PAF pair as a dict of arrays, sorted by descending score."""
    if paf_x.shape != paf_y.shape:
        raise ValueError("PAF planes differ in size")
    mag = np.hypot(paf_x, paf_y)
    labels, n = K.label(mag > config.tau_paf, 8)
    st = K.region_stats(labels, n, mag)
    ps = K.region_paf_stats(labels, n, paf_x, paf_y)

    a = st[:, K.MXX] + PIXEL_VARIANCE
    c = st[:, K.MYY] + PIXEL_VARIANCE
    b = st[:, K.MXY]
    r = np.hypot(0.5 * (a - c), b)
    length = 4.0 * np.sqrt(0.5 * (a + c) + r)
    orient = 0.5 * np.arctan2(2.0 * b, a - c)
    orient = np.where(r <= _ISOTROPY_RTOL * (a + c), 0.0, orient)
    single = st[:, K.COUNT] <= 1
    length = np.where(single, 0.0, length)
    orient = np.where(single, 0.0, orient)

    normal = np.stack([np.cos(orient), np.sin(orient)], axis=1)
    flip = (normal * ps[:, 2:4]).sum(axis=1) < 0
    normal[flip] *= -1.0
    centroid = st[:, [K.CX, K.CY]]
    half = (config.lambda_a * length / 2.0)[:, None]
    angle = np.degrees(ps[:, 0])
    angle = np.mod(angle + 180.0, 360.0) - 180.0
    angle = np.where(angle == -180.0, 180.0, angle)
    score = ps[:, 1]
    order = np.argsort(-score, kind="stable")
    return {
        "centroid": centroid[order],
        "length": length[order],
        "normal": normal[order],
        "angle_deg": angle[order],
        "score": score[order],
        "wrist": (centroid + half * normal)[order],
        "elbow": (centroid - half * normal)[order],
        "est_score": config.lambda_s * score[order],
        "size": st[order, K.COUNT].astype(np.int64),
    }


def extract_pcm_candidates(pcm: np.ndarray, config: PipelineConfig = PipelineConfig()) -> List[PcmCandidate]:
    """Threshold (strictly above tau_pcm), label with 8-connectivity, one candidate per region."""
    loc, score, size = decode_pcm(np.asarray(pcm), config.tau_pcm)
    return [PcmCandidate((float(p[0]), float(p[1])), float(s), int(z))
            for p, s, z in zip(loc, score, size)]


def extract_paf_candidates(paf_x: np.ndarray, paf_y: np.ndarray,
                           config: PipelineConfig = PipelineConfig()) -> List[PafCandidate]:
    d = decode_paf(np.asarray(paf_x), np.asarray(paf_y), config)
    out = []
    for i in range(len(d["score"])):
        out.append(PafCandidate(
            centroid=tuple(map(float, d["centroid"][i])),
            major_axis_len=float(d["length"][i]),
            normal=tuple(map(float, d["normal"][i])),
            angle_deg=float(d["angle_deg"][i]),
            score=float(d["score"][i]),
            wrist_est=tuple(map(float, d["wrist"][i])),
            elbow_est=tuple(map(float, d["elbow"][i])),
            est_score=float(d["est_score"][i]),
            region_size=int(d["size"][i]),
        ))
    return out
