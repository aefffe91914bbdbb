from .config import SimConfig
from .models import FEATURE_ID_STRIDE, ModelLibrary, ObjectModel, generate_model_library
from .render import Frame, empty_frame, ground_truth_segmenter, render, segment
from .scene import (
    Placement,
    RearrangementInstance,
    Rect,
    SceneState,
    apply_move,
    generate_instance,
)
from .io import (
    load_dataset,
    load_instance,
    save_dataset,
    save_instance,
)

__all__ = [
    "SimConfig",
    "FEATURE_ID_STRIDE",
    "ModelLibrary",
    "ObjectModel",
    "generate_model_library",
    "Frame",
    "empty_frame",
    "ground_truth_segmenter",
    "render",
    "segment",
    "Placement",
    "RearrangementInstance",
    "Rect",
    "SceneState",
    "apply_move",
    "generate_instance",
    "load_dataset",
    "load_instance",
    "save_dataset",
    "save_instance",
]
