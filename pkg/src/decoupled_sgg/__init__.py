"""Decoupled dual-branch dynamic scene-graph generation at desk scale."""

from .geometry import Box, giou, iou, relation_region, union_box
from .structures import FrameAnnotation, PredictionSet, Triplet, TripletClass, VideoAnnotation

__version__ = "0.1.0"

__all__ = [
    "Box", "FrameAnnotation", "PredictionSet", "Triplet", "TripletClass", "VideoAnnotation",
    "giou", "iou", "relation_region", "union_box",
]
