"""Post-processing and evaluation toolkit for spatio-temporal action detection."""

from .count_signal import (
    DetectionCountSeries,
    FrameDetections,
    continuous_regions,
    count_series,
    expected_counts,
    median_smooth,
    pad_detections,
)
from .errors import EmptyFrameError, InstanceTooLargeError, ParseError, VocabularyError
from .evaluation import (
    ClassResult,
    EvalConfig,
    EvalReport,
    average_precision,
    match_predictions,
    video_map,
)
from .formats import (
    FlowField,
    LabelMask,
    encode_flow,
    mask_to_boxes,
    read_detections,
    read_predictions,
    read_report,
    read_scores,
    read_tubes,
    write_detections,
    write_predictions,
    write_report,
    write_scores,
    write_tubes,
)
from .fusion import (
    ActionnessSeries,
    ClipScore,
    ScoreVector,
    StreamScoreSet,
    actionness,
    aggregate_video,
    compose_actionness,
    frame_scores_from_clips,
    multigranular_fuse,
    softmax,
    temporal_localize,
    tube_actionness,
)
from .geometry import Box2D, TemporalSpan, Tube, box_iou, temporal_iou, tube_iou
from .linking import (
    BoxPath,
    ExtractionConfig,
    LinkingProblem,
    extract_tubes,
    viterbi_link,
)
from .synth import SynthConfig, brute_force_eval, brute_force_link, generate_scene

__version__ = "0.1.0"

__all__ = [
    "ActionnessSeries",
    "Box2D",
    "BoxPath",
    "ClassResult",
    "ClipScore",
    "DetectionCountSeries",
    "EmptyFrameError",
    "EvalConfig",
    "EvalReport",
    "ExtractionConfig",
    "FlowField",
    "FrameDetections",
    "InstanceTooLargeError",
    "LabelMask",
    "LinkingProblem",
    "ParseError",
    "ScoreVector",
    "StreamScoreSet",
    "SynthConfig",
    "TemporalSpan",
    "Tube",
    "VocabularyError",
    "actionness",
    "aggregate_video",
    "average_precision",
    "box_iou",
    "brute_force_eval",
    "brute_force_link",
    "compose_actionness",
    "continuous_regions",
    "count_series",
    "encode_flow",
    "expected_counts",
    "extract_tubes",
    "frame_scores_from_clips",
    "generate_scene",
    "mask_to_boxes",
    "match_predictions",
    "median_smooth",
    "multigranular_fuse",
    "pad_detections",
    "read_detections",
    "read_predictions",
    "read_report",
    "read_scores",
    "read_tubes",
    "softmax",
    "temporal_iou",
    "temporal_localize",
    "tube_actionness",
    "tube_iou",
    "video_map",
    "viterbi_link",
    "write_detections",
    "write_predictions",
    "write_report",
    "write_scores",
    "write_tubes",
]
