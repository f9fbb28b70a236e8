"""PAF-first association of joint candidates into arms, hand extrapolation, occupancy maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import erf

from . import _kernels as K
from .core import (
    ArmClass,
    HeatmapStack,
    PipelineConfig,
    Point,
    heatmap_to_input_coords,
)
from .extract import PafCandidate, PcmCandidate, decode_paf, decode_pcm

PCM = "pcm"
PAF = "paf"


@dataclass(frozen=True)
class ArmDetection:
    """Decoded arm. Joint coordinates are input-image pixels; scores are unitless."""

    arm: ArmClass
    present: bool
    wrist: Optional[Point] = None
    elbow: Optional[Point] = None
    wrist_source: Optional[str] = None
    elbow_source: Optional[str] = None
    S_w: float = 0.0
    S_e: float = 0.0
    S_a: float = 0.0
    angle_deg: float = 0.0
    S_total: float = 0.0

    @classmethod
    def absent(cls, arm: ArmClass) -> "ArmDetection":
        return cls(arm=arm, present=False)


def select_joint(paf_estimate: Point, est_score: float,
                 pcm_candidates: Sequence[PcmCandidate], sigma_s: float):
    """Pick the joint maximising ``S_x * exp(-|x - paf_estimate|^2 / sigma_s^2)``.

    The PAF estimate itself is always a candidate with score ``est_score``.
    Ties favour PCM candidates, then the lowest candidate index. Returns
    ``(location, decayed_score, source)``.
    """
    best_loc, best_f, best_src = tuple(paf_estimate), float(est_score), PAF
    best_pcm_f = -math.inf
    best_pcm = None
    s2 = sigma_s * sigma_s
    for c in pcm_candidates:
        dx = c.location[0] - paf_estimate[0]
        dy = c.location[1] - paf_estimate[1]
        f = c.score * math.exp(-(dx * dx + dy * dy) / s2)
        if f > best_pcm_f:
            best_pcm_f, best_pcm = f, c
    if best_pcm is not None and best_pcm_f >= best_f:
        return tuple(best_pcm.location), best_pcm_f, PCM
    return best_loc, best_f, best_src


def _select_batch(est: np.ndarray, est_score: np.ndarray, loc: np.ndarray,
                  score: np.ndarray, sigma_s: float):
    """select_joint over many PAF estimates at once."""
    idx, f = K.select_joints(est, est_score, loc, score, sigma_s)
    use_pcm = idx >= 0
    at = np.where(use_pcm[:, None], loc[np.maximum(idx, 0)] if loc.shape[0] else est, est)
    return at, f, use_pcm


def _to_input(p, stride: int) -> Point:
    x, y = heatmap_to_input_coords((float(p[0]), float(p[1])), stride)
    return (x, y)


def score_arm(arm: ArmClass, paf: PafCandidate, pcm_wrists: Sequence[PcmCandidate],
              pcm_elbows: Sequence[PcmCandidate], config: PipelineConfig = PipelineConfig(),
              stride: int = 8) -> ArmDetection:
    """Resolve both joints of one arm hypothesis and average the three component scores.

    The returned detection is always ``present``; presence thresholding is
    applied by :func:`detect_arms`.
    """
    w_loc, s_w, w_src = select_joint(paf.wrist_est, paf.est_score, pcm_wrists, config.sigma_s)
    e_loc, s_e, e_src = select_joint(paf.elbow_est, paf.est_score, pcm_elbows, config.sigma_s)
    return ArmDetection(
        arm=arm, present=True,
        wrist=_to_input(w_loc, stride), elbow=_to_input(e_loc, stride),
        wrist_source=w_src, elbow_source=e_src,
        S_w=s_w, S_e=s_e, S_a=paf.score, angle_deg=paf.angle_deg,
        S_total=(paf.score + s_w + s_e) / 3.0,
    )


def detect_arm(stack: HeatmapStack, arm: ArmClass, config: PipelineConfig = PipelineConfig()) -> ArmDetection:
    paf_x, paf_y = stack.paf(arm)
    d = decode_paf(paf_x, paf_y, config)
    if d["score"].size == 0:
        return ArmDetection.absent(arm)
    wloc, wscore, _ = decode_pcm(stack.pcm(arm, "wrist"), config.tau_pcm)
    eloc, escore, _ = decode_pcm(stack.pcm(arm, "elbow"), config.tau_pcm)
    w_at, s_w, w_pcm = _select_batch(d["wrist"], d["est_score"], wloc, wscore, config.sigma_s)
    e_at, s_e, e_pcm = _select_batch(d["elbow"], d["est_score"], eloc, escore, config.sigma_s)
    total = (d["score"] + s_w + s_e) / 3.0
    i = int(np.argmax(total))
    if not total[i] > config.presence_threshold:
        return ArmDetection.absent(arm)
    return ArmDetection(
        arm=arm, present=True,
        wrist=_to_input(w_at[i], stack.stride), elbow=_to_input(e_at[i], stack.stride),
        wrist_source=PCM if w_pcm[i] else PAF, elbow_source=PCM if e_pcm[i] else PAF,
        S_w=float(s_w[i]), S_e=float(s_e[i]), S_a=float(d["score"][i]),
        angle_deg=float(d["angle_deg"][i]), S_total=float(total[i]),
    )


def detect_arms(stack: HeatmapStack, config: PipelineConfig = PipelineConfig()) -> Dict[ArmClass, ArmDetection]:
    """Best-scoring arm per class; classes without a PAF region (or below the
    presence threshold) come back with ``present=False``."""
    if not isinstance(stack, HeatmapStack):
        stack = HeatmapStack(stack)
    return {arm: detect_arm(stack, arm, config) for arm in ArmClass}


def extrapolate_hand(wrist: Sequence[float], elbow: Sequence[float], lambda_h: float = 0.25) -> Point:
    """Extend the elbow-to-wrist vector past the wrist by ``lambda_h`` of its length."""
    dx = wrist[0] - elbow[0]
    dy = wrist[1] - elbow[1]
    if dx == 0 and dy == 0:
        raise ValueError("wrist and elbow coincide")
    return (wrist[0] + lambda_h * dx, wrist[1] + lambda_h * dy)


@dataclass
class OccupancyMap:
    """Accumulated hand-location density at input resolution.

    Each accepted point adds a Gaussian splat normalised to unit mass over
    the infinite plane. Not thread-safe; accumulate into separate maps and
    combine them with :meth:`merge`.
    """

    width: int
    height: int
    splat_sigma: float = 8.0
    mode_filter: Optional[str] = None
    grid: np.ndarray = field(default=None, repr=False)
    count: int = 0

    def __post_init__(self):
        if self.splat_sigma <= 0:
            raise ValueError("splat_sigma must be > 0")
        if self.mode_filter not in (None, "manual", "autonomous"):
            raise ValueError(f"bad mode_filter {self.mode_filter!r}")
        if self.grid is None:
            self.grid = np.zeros((self.height, self.width))

    def _axis_weights(self, n: int, center: float) -> np.ndarray:
        # pixel-integrated Gaussian so the splat mass is exact away from borders
        edges = np.arange(n + 1) - 0.5 - center
        cdf = 0.5 * (1.0 + erf(edges / (self.splat_sigma * math.sqrt(2.0))))
        return np.diff(cdf)

    def accumulate(self, hand: Sequence[float], drive_mode: Optional[str] = None) -> bool:
        """Add one hand point; returns False when filtered out or off-grid."""
        if self.mode_filter is not None and drive_mode != self.mode_filter:
            return False
        x, y = float(hand[0]), float(hand[1])
        if not (0 <= x <= self.width - 1 and 0 <= y <= self.height - 1):
            return False
        self.grid += np.outer(self._axis_weights(self.height, y), self._axis_weights(self.width, x))
        self.count += 1
        return True

    def merge(self, other: "OccupancyMap") -> "OccupancyMap":
        if self.grid.shape != other.grid.shape:
            raise ValueError("occupancy maps differ in size")
        return OccupancyMap(self.width, self.height, self.splat_sigma, self.mode_filter,
                            self.grid + other.grid, self.count + other.count)


def accumulate_occupancy(occ: OccupancyMap, hand: Sequence[float],
                         drive_mode: Optional[str] = None) -> OccupancyMap:
    occ.accumulate(hand, drive_mode)
    return occ
