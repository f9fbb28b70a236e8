"""Shared domain types, arm taxonomy and coordinate conventions.

Coordinates are ``(x, y)`` pairs with x to the right and y downward, the
origin at the centre of the top-left pixel. Angles follow ``atan2(dy, dx)``
applied to those y-down coordinates, so a wrist lying below its elbow gives
a positive angle.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

Point = Tuple[float, float]

STRIDE = 8
N_PCM = 8
N_PAF = 8
N_CHANNELS = N_PCM + N_PAF + 1
BACKGROUND_CHANNEL = N_PCM + N_PAF
PAF_EPS = 1e-6


class ArmClass(enum.IntEnum):
    """The four arms visible from the cabin camera.

    The integer value is the arm's index in the channel layout: arm ``k``
    owns PCM channels ``2k`` (elbow) and ``2k + 1`` (wrist) and PAF
    channels ``8 + 2k`` (x) and ``9 + 2k`` (y).
    """

    DriverLeft = 0
    DriverRight = 1
    PassengerLeft = 2
    PassengerRight = 3

    @property
    def is_driver(self) -> bool:
        return self in (ArmClass.DriverLeft, ArmClass.DriverRight)

    @property
    def elbow_channel(self) -> int:
        return 2 * int(self)

    @property
    def wrist_channel(self) -> int:
        return 2 * int(self) + 1

    @property
    def paf_channels(self) -> Tuple[int, int]:
        return N_PCM + 2 * int(self), N_PCM + 2 * int(self) + 1

    def mirror(self) -> "ArmClass":
        return _MIRROR[self]

    @classmethod
    def parse(cls, name: str) -> "ArmClass":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown arm class {name!r}; expected one of "
                             f"{[c.name for c in cls]}") from None


_MIRROR = {
    ArmClass.DriverLeft: ArmClass.PassengerRight,
    ArmClass.PassengerRight: ArmClass.DriverLeft,
    ArmClass.DriverRight: ArmClass.PassengerLeft,
    ArmClass.PassengerLeft: ArmClass.DriverRight,
}

JOINTS = ("elbow", "wrist")

# (arm, joint) for every PCM channel, in channel order.
PART_CHANNELS: Tuple[Tuple[ArmClass, str], ...] = tuple(
    (arm, joint) for arm in ArmClass for joint in JOINTS
)


def part_name(arm: ArmClass, joint: str) -> str:
    return f"{arm.name}.{joint}"


def mirror(arm: ArmClass) -> ArmClass:
    return _MIRROR[arm]


@dataclass(frozen=True)
class JointAnnotation:
    """Ground-truth wrist/elbow pair for one arm, in input-image pixels."""

    arm: ArmClass
    wrist: Point
    elbow: Point
    visible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "wrist", (float(self.wrist[0]), float(self.wrist[1])))
        object.__setattr__(self, "elbow", (float(self.elbow[0]), float(self.elbow[1])))
        if self.visible and self.length == 0.0:
            raise ValueError(f"{self.arm.name}: wrist and elbow coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.wrist[0] - self.elbow[0], self.wrist[1] - self.elbow[1])

    def joint(self, name: str) -> Point:
        if name == "wrist":
            return self.wrist
        if name == "elbow":
            return self.elbow
        raise ValueError(f"unknown joint {name!r}")

    def in_bounds(self, width: int, height: int) -> bool:
        return all(0 <= x <= width - 1 and 0 <= y <= height - 1
                   for x, y in (self.wrist, self.elbow))


@dataclass(frozen=True)
class FrameAnnotation:
    frame_id: str
    image_size: Tuple[int, int]
    arms: Tuple[JointAnnotation, ...] = ()
    drive_mode: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError(f"frame {self.frame_id}: bad image size {self.image_size}")
        object.__setattr__(self, "image_size", (int(w), int(h)))
        seen = [a.arm for a in self.arms]
        if len(set(seen)) != len(seen):
            raise ValueError(f"frame {self.frame_id}: duplicate arm classes")
        if self.drive_mode not in (None, "manual", "autonomous"):
            raise ValueError(f"frame {self.frame_id}: bad drive_mode {self.drive_mode!r}")

    def get(self, arm: ArmClass) -> Optional[JointAnnotation]:
        for a in self.arms:
            if a.arm == arm:
                return a
        return None

    @property
    def heatmap_size(self) -> Tuple[int, int]:
        return self.image_size[0] // STRIDE, self.image_size[1] // STRIDE


@dataclass(frozen=True, eq=False)
class HeatmapStack:
    """17 float planes ``[PCM x 8, PAF x 8, background]`` at 1/8 resolution.

    ``data`` has shape ``(17, height, width)``. Construction checks the
    shape only; :meth:`check_ranges` validates the value ranges, which
    network outputs are not guaranteed to respect.
    """

    data: np.ndarray
    stride: int = STRIDE

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or data.shape[0] != N_CHANNELS:
            raise ValueError(f"heatmap stack must have shape (17, h, w), got {data.shape}")
        if data.shape[1] == 0 or data.shape[2] == 0:
            raise ValueError("heatmap stack has zero area")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def pcms(self) -> np.ndarray:
        return self.data[:N_PCM]

    @property
    def pafs(self) -> np.ndarray:
        return self.data[N_PCM:N_PCM + N_PAF]

    @property
    def background(self) -> np.ndarray:
        return self.data[BACKGROUND_CHANNEL]

    def pcm(self, arm: ArmClass, joint: str) -> np.ndarray:
        ch = arm.wrist_channel if joint == "wrist" else arm.elbow_channel
        return self.data[ch]

    def paf(self, arm: ArmClass) -> Tuple[np.ndarray, np.ndarray]:
        cx, cy = arm.paf_channels
        return self.data[cx], self.data[cy]

    def check_ranges(self) -> None:
        """Raise ValueError if any plane violates its value range."""
        conf = np.concatenate([self.pcms, self.background[None]])
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite heatmap values")
        if conf.min() < 0 or conf.max() > 1:
            raise ValueError("PCM/background values outside [0, 1]")
        pafs = self.pafs
        if np.abs(pafs).max() > 1:
            raise ValueError("PAF components outside [-1, 1]")
        mag = np.hypot(pafs[0::2].astype(np.float64), pafs[1::2].astype(np.float64))
        if mag.max() > 1 + PAF_EPS:
            raise ValueError("PAF magnitude exceeds 1")


@dataclass(frozen=True)
class PipelineConfig:
    """Label-rendering and decoding parameters; distances in heatmap pixels."""

    sigma_pcm: float = 1.5
    sigma_paf: float = 1.0
    tau_pcm: float = 0.1
    tau_paf: float = 0.1
    lambda_a: float = 0.75
    lambda_s: float = 0.5
    sigma_s: float = 4.0
    lambda_h: float = 0.25
    presence_threshold: float = 0.2

    def __post_init__(self):
        for name in ("sigma_pcm", "sigma_paf", "sigma_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("tau_pcm", "tau_paf"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 < self.lambda_a <= 2:
            raise ValueError("lambda_a must lie in (0, 2]")
        if not 0 < self.lambda_s <= 1:
            raise ValueError("lambda_s must lie in (0, 1]")
        if not self.lambda_h >= 0:
            raise ValueError("lambda_h must be >= 0")
        if not 0 <= self.presence_threshold < 1:
            raise ValueError("presence_threshold must lie in [0, 1)")

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def updated(self, overrides: Mapping[str, object]) -> "PipelineConfig":
        """Return a copy with ``overrides`` applied; unknown keys raise."""
        unknown = set(overrides) - set(self.field_names())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


def heatmap_to_input_coords(p: Sequence[float], stride: int = STRIDE) -> Point:
    """Map a heatmap coordinate to the centre of its input-pixel cell."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    off = (stride - 1) / 2.0
    return (p[0] * stride + off, p[1] * stride + off)


def input_to_heatmap_coords(p: Sequence[float], stride: int = STRIDE) -> Point:
    """Continuous inverse of :func:`heatmap_to_input_coords`."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    off = (stride - 1) / 2.0
    return ((p[0] - off) / stride, (p[1] - off) / stride)


def input_to_heatmap_cell(p: Sequence[float], stride: int = STRIDE) -> Tuple[int, int]:
    """Index of the heatmap cell whose footprint contains ``p``.

    Equals ``floor((p - offset) / stride)`` rounded to the nearest cell, so
    every input pixel ``i`` lands in cell ``i // stride``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    off = (stride - 1) / 2.0
    return (int(math.floor((p[0] - off) / stride + 0.5)),
            int(math.floor((p[1] - off) / stride + 0.5)))


def arm_angle(wrist: Sequence[float], elbow: Sequence[float]) -> float:
    """Elbow-to-wrist direction in degrees, in (-180, 180]."""
    dx = wrist[0] - elbow[0]
    dy = wrist[1] - elbow[1]
    if dx == 0 and dy == 0:
        raise ValueError("wrist and elbow coincide")
    a = math.degrees(math.atan2(dy, dx))
    return 180.0 if a == -180.0 else a


def wrap_degrees(a):
    """Wrap angles to (-180, 180]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + 180.0, 360.0) - 180.0
    w = np.where(w == -180.0, 180.0, w)
    return float(w) if np.ndim(w) == 0 else w


def iter_parts(frames: Iterable[FrameAnnotation]):
    """Yield ``(frame_id, arm, joint, point)`` for every visible joint."""
    for frame in frames:
        for a in frame.arms:
            if a.visible:
                for joint in JOINTS:
                    yield frame.frame_id, a.arm, joint, a.joint(joint)
