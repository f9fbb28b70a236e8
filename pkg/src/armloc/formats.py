"""File formats: HMAP heatmap files, annotation JSON, detection JSONL, PNG, CSV.

HMAP layout (little-endian)::

    magic    4 bytes  b"HMAP"
    version  u8       1
    width    u32
    height   u32
    channels u32
    data     f32 * channels * height * width, channel-major then row-major
"""
from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np

from .core import N_CHANNELS, ArmClass, FrameAnnotation, HeatmapStack, JointAnnotation

MAGIC = b"HMAP"
VERSION = 1
_HEADER = struct.Struct("<4sBIII")


class FormatError(ValueError):
    """Malformed input file. ``code`` distinguishes the failure kind."""

    code = "format"


class BadMagicError(FormatError):
    code = "bad_magic"


class VersionError(FormatError):
    code = "version"


class TruncatedError(FormatError):
    code = "truncated"


class TrailingDataError(FormatError):
    code = "trailing_data"


# --------------------------------------------------------------------------
# atomic writes

def atomic_write_bytes(path: Union[str, Path], payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Union[str, Path], text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# --------------------------------------------------------------------------
# HMAP

def encode_hmap(planes: Union[HeatmapStack, np.ndarray]) -> bytes:
    data = planes.data if isinstance(planes, HeatmapStack) else np.asarray(planes)
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3:
        raise ValueError(f"expected (channels, h, w) planes, got shape {data.shape}")
    c, h, w = data.shape
    body = np.ascontiguousarray(data, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, VERSION, w, h, c) + body


def decode_hmap(buf: bytes) -> Union[HeatmapStack, np.ndarray]:
    """Parse HMAP bytes: a HeatmapStack for 17 channels, else a ``(c, h, w)`` array."""
    if len(buf) < _HEADER.size:
        if buf[:4] != MAGIC[:len(buf[:4])]:
            raise BadMagicError(f"bad magic {buf[:4]!r}")
        raise TruncatedError(f"header needs {_HEADER.size} bytes, got {len(buf)}")
    magic, version, w, h, c = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported HMAP version {version}")
    expected = w * h * c * 4
    got = len(buf) - _HEADER.size
    if got < expected:
        raise TruncatedError(f"declared {w}x{h}x{c} needs {expected} data bytes, got {got}")
    if got > expected:
        raise TrailingDataError(f"{got - expected} bytes after declared data")
    arr = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    arr = arr.astype(np.float32)
    if c == N_CHANNELS and w > 0 and h > 0:
        return HeatmapStack(arr)
    return arr


def write_hmap(path: Union[str, Path], planes) -> None:
    atomic_write_bytes(path, encode_hmap(planes))


def read_hmap(path: Union[str, Path]):
    return decode_hmap(Path(path).read_bytes())


# --------------------------------------------------------------------------
# annotations

def frame_from_dict(d: Mapping) -> FrameAnnotation:
    try:
        arms = tuple(
            JointAnnotation(
                arm=ArmClass.parse(a["class"]),
                wrist=tuple(a["wrist"]),
                elbow=tuple(a["elbow"]),
                visible=bool(a.get("visible", True)),
            )
            for a in d.get("arms", [])
        )
        return FrameAnnotation(
            frame_id=str(d["frame_id"]),
            image_size=(int(d["image_w"]), int(d["image_h"])),
            arms=arms,
            drive_mode=d.get("drive_mode"),
        )
    except (KeyError, TypeError, IndexError) as e:
        raise FormatError(f"malformed frame annotation: {e!r}") from e
    except ValueError as e:
        raise FormatError(str(e)) from e


def frame_to_dict(f: FrameAnnotation) -> dict:
    d = {"frame_id": f.frame_id, "image_w": f.image_size[0], "image_h": f.image_size[1]}
    if f.drive_mode is not None:
        d["drive_mode"] = f.drive_mode
    d["arms"] = [{"class": a.arm.name, "wrist": list(a.wrist), "elbow": list(a.elbow),
                  "visible": a.visible} for a in f.arms]
    return d


def parse_annotations(text: str) -> List[FrameAnnotation]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"annotation file is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), list):
        raise FormatError("annotation file needs a top-level 'frames' list")
    frames = [frame_from_dict(d) for d in doc["frames"]]
    ids = [f.frame_id for f in frames]
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate frame_id in annotation file")
    return frames


def read_annotations(path: Union[str, Path]) -> List[FrameAnnotation]:
    return parse_annotations(Path(path).read_text())


def dumps_annotations(frames: Iterable[FrameAnnotation]) -> str:
    return json.dumps({"frames": [frame_to_dict(f) for f in frames]}, indent=1) + "\n"


def write_annotations(path: Union[str, Path], frames: Iterable[FrameAnnotation]) -> None:
    atomic_write_text(path, dumps_annotations(frames))


# --------------------------------------------------------------------------
# detections (JSON lines, one frame per line)

def _r(v: float) -> float:
    return float(v)


def detections_record(frame_id: str, dets: Mapping[ArmClass, object],
                      image_size: Tuple[int, int]) -> dict:
    arms = []
    for arm in ArmClass:
        d = dets[arm]
        rec = {"class": arm.name, "present": bool(d.present)}
        if d.present:
            rec.update({
                "wrist": [_r(d.wrist[0]), _r(d.wrist[1])], "wrist_source": d.wrist_source,
                "elbow": [_r(d.elbow[0]), _r(d.elbow[1])], "elbow_source": d.elbow_source,
                "S_w": _r(d.S_w), "S_e": _r(d.S_e), "S_a": _r(d.S_a),
                "angle_deg": _r(d.angle_deg), "S_total": _r(d.S_total),
            })
        arms.append(rec)
    return {"frame_id": frame_id, "image_w": int(image_size[0]),
            "image_h": int(image_size[1]), "arms": arms}


def dumps_detections(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records)


def parse_detections(text: str):
    """Parse JSONL into ``(detections, image_sizes)`` keyed by frame_id."""
    from .associate import ArmDetection

    dets: Dict[str, Dict[ArmClass, ArmDetection]] = {}
    sizes: Dict[str, Tuple[int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            fid = str(rec["frame_id"])
            per = {}
            for a in rec["arms"]:
                arm = ArmClass.parse(a["class"])
                if a.get("present"):
                    per[arm] = ArmDetection(
                        arm=arm, present=True,
                        wrist=tuple(a["wrist"]), elbow=tuple(a["elbow"]),
                        wrist_source=a.get("wrist_source"), elbow_source=a.get("elbow_source"),
                        S_w=a["S_w"], S_e=a["S_e"], S_a=a["S_a"],
                        angle_deg=a["angle_deg"], S_total=a["S_total"],
                    )
                else:
                    per[arm] = ArmDetection.absent(arm)
            dets[fid] = per
            sizes[fid] = (int(rec["image_w"]), int(rec["image_h"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise FormatError(f"detections line {lineno}: {e}") from e
    return dets, sizes


def read_detections(path: Union[str, Path]):
    return parse_detections(Path(path).read_text())


# --------------------------------------------------------------------------
# images and curves

def read_gray_png(path: Union[str, Path]) -> np.ndarray:
    """Load an image as grayscale float in [0, 1]; colour inputs use ITU-R 601 luma."""
    from PIL import Image

    from .augment import to_grayscale_3ch

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "F"):
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            arr = to_grayscale_3ch(rgb)[:, :, 0]
    return arr


def encode_gray_png(image: np.ndarray) -> bytes:
    from io import BytesIO

    from PIL import Image

    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img[:, :, 0]
    u8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    from io import BytesIO

    from PIL import Image

    u8 = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = BytesIO()
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def curves_csv(curves: Mapping[str, object], threshold_name: str) -> str:
    """One row per threshold, one column per curve."""
    names = list(curves)
    first = curves[names[0]]
    from io import StringIO

    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([threshold_name] + names)
    for i, t in enumerate(first.thresholds):
        w.writerow([repr(float(t))] + [repr(float(curves[n].detection_rate[i])) for n in names])
    return buf.getvalue()
