"""Arm localization for in-cabin driver/passenger monitoring.

Renders ground-truth heatmaps, augments training images, decodes part
confidence maps and part affinity fields into per-arm detections, and
evaluates them with PCK and angle curves.
"""
from .core import (
    ArmClass,
    FrameAnnotation,
    HeatmapStack,
    JointAnnotation,
    PipelineConfig,
    heatmap_to_input_coords,
    input_to_heatmap_cell,
    input_to_heatmap_coords,
    mirror,
)
from .associate import ArmDetection, OccupancyMap, detect_arms, extrapolate_hand
from .labelgen import render_stack

__all__ = [
    "ArmClass", "ArmDetection", "FrameAnnotation", "HeatmapStack", "JointAnnotation",
    "OccupancyMap", "PipelineConfig", "detect_arms", "extrapolate_hand",
    "heatmap_to_input_coords", "input_to_heatmap_cell", "input_to_heatmap_coords",
    "mirror", "render_stack",
]
__version__ = "0.1.0"
