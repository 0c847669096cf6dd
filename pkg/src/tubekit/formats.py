"""File formats, mask-to-box extraction, and optical-flow encoding.

All files are line-delimited JSON, one record per line:

  detections  {"video_id", "frame", "boxes": [{"x1","y1","x2","y2","score"?}]}
  scores      {"video_id", "stream", "granularity", "clip_start", "crop_id",
               "kind", "values": [K reals]}
  tubes       {"video_id", "label", "start", "end", "score"?,
               "boxes": [[x1,y1,x2,y2] per frame]}
  report      {"delta", "class", "ap", "pr": [[recall, precision] ...], "map"}

Writers emit a fixed field order and quantize reals to 6 significant
digits, so identical inputs always produce identical bytes. Readers ignore
unknown extra fields and reject schema violations with the file, line and
field named in the error.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .count_signal import FrameDetections
from .errors import ParseError, VocabularyError
from .evaluation import EvalReport, VideoTube
from .fusion import (
    FIXED_CROPS,
    GRANULARITIES,
    KINDS,
    STREAMS,
    ClipScore,
    ScoreVector,
    StreamScoreSet,
)
from .geometry import Box2D, TemporalSpan, Tube


def quantize(x: float) -> float:
    """Round to 6 significant digits, the precision written to files."""
    return float(f"{x:.6g}")


def _dump(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel body-part labels; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
        if np.issubdtype(arr.dtype, np.floating):
            raise ValueError("mask labels must be integers")
        if (arr < 0).any():
            raise ValueError("mask labels must be >= 0")
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class FlowField:
    """Dense optical flow, x and y displacement per pixel."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape or u.shape[0] < 1 or u.shape[1] < 1:
            raise ValueError(f"flow components must share a non-empty 2-D shape, got {u.shape} and {v.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValueError("flow field contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def mask_to_boxes(mask: LabelMask, min_pixels: int = 25) -> list[Box2D]:
    """Tight half-open boxes around 8-connected foreground components.

    Components smaller than ``min_pixels`` pixels are treated as
    segmentation speckle and dropped. Boxes come sorted by descending area.
    """
    if min_pixels < 1:
        raise ValueError(f"min_pixels must be >= 1, got {min_pixels}")
    fg = mask.labels >= 1
    labeled, n = ndimage.label(fg, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    counts = np.bincount(labeled.ravel())
    boxes: list[Box2D] = []
    for comp, sl in enumerate(ndimage.find_objects(labeled), start=1):
        if sl is None or counts[comp] < min_pixels:
            continue
        ys, xs = sl
        boxes.append(
            Box2D(x1=float(xs.start), y1=float(ys.start), x2=float(xs.stop), y2=float(ys.stop))
        )
    boxes.sort(key=lambda b: -b.area)
    return boxes


def encode_flow(flow: FlowField) -> np.ndarray:
    """3-channel byte image: offset-quantized components plus magnitude.

    Components are scaled by 16 and shifted by 128 so signed values survive
    the byte quantization; the magnitude channel needs no offset.
    """
    u, v = flow.u, flow.v
    c1 = np.clip(np.rint(u * 16.0 + 128.0), 0, 255)
    c2 = np.clip(np.rint(v * 16.0 + 128.0), 0, 255)
    c3 = np.clip(np.rint(np.sqrt(u * u + v * v) * 16.0), 0, 255)
    return np.stack([c1, c2, c3], axis=-1).astype(np.uint8)


# ---------------------------------------------------------------------------
# line-delimited JSON readers and writers


def _iter_records(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, None, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(path, line_no, None, "record is not an object")
            yield line_no, record


def _field(path, line_no, record, name, types, type_name):
    if name not in record:
        raise ParseError(path, line_no, name, "missing required field")
    value = record[name]
    if isinstance(value, bool) or not isinstance(value, types):
        raise ParseError(path, line_no, name, f"expected {type_name}, got {value!r}")
    return value


def write_detections(path, videos: Iterable[FrameDetections]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for dets in videos:
            for f in range(dets.length):
                boxes = []
                for b in dets.boxes_on(f):
                    rec = {
                        "x1": quantize(b.x1),
                        "y1": quantize(b.y1),
                        "x2": quantize(b.x2),
                        "y2": quantize(b.y2),
                    }
                    if b.score is not None:
                        rec["score"] = quantize(b.score)
                    boxes.append(rec)
                fh.write(_dump({"video_id": dets.video_id, "frame": f, "boxes": boxes}) + "\n")


def read_detections(path) -> list[FrameDetections]:
    """Videos in first-appearance order; a video's length is max frame + 1."""
    frames: dict[str, dict[int, tuple[Box2D, ...]]] = {}
    for line_no, record in _iter_records(path):
        vid = _field(path, line_no, record, "video_id", str, "a string")
        frame = _field(path, line_no, record, "frame", int, "an integer")
        if frame < 0:
            raise ParseError(path, line_no, "frame", f"negative frame index {frame}")
        raw_boxes = _field(path, line_no, record, "boxes", list, "an array")
        boxes = []
        for rb in raw_boxes:
            if not isinstance(rb, dict):
                raise ParseError(path, line_no, "boxes", f"box is not an object: {rb!r}")
            coords = {}
            for key in ("x1", "y1", "x2", "y2"):
                coords[key] = float(_field(path, line_no, rb, key, (int, float), "a number"))
            score = rb.get("score")
            if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
                raise ParseError(path, line_no, "score", f"expected a number, got {score!r}")
            try:
                boxes.append(Box2D(frame=frame, score=None if score is None else float(score), **coords))
            except ValueError as exc:
                raise ParseError(path, line_no, "boxes", str(exc)) from exc
        per_video = frames.setdefault(vid, {})
        if frame in per_video:
            raise ParseError(path, line_no, "frame", f"duplicate frame {frame} for video {vid!r}")
        per_video[frame] = tuple(boxes)
    return [
        FrameDetections(video_id=vid, length=max(per_video) + 1, frames=per_video)
        for vid, per_video in frames.items()
    ]


def write_scores(path, sets: Iterable[StreamScoreSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            for e in s.entries:
                fh.write(
                    _dump(
                        {
                            "video_id": s.video_id,
                            "stream": s.stream,
                            "granularity": s.granularity,
                            "clip_start": e.clip_start,
                            "crop_id": e.crop_id,
                            "kind": e.vector.kind,
                            "values": [quantize(v) for v in e.vector.values],
                        }
                    )
                    + "\n"
                )


def read_scores(path) -> list[StreamScoreSet]:
    """Score sets grouped by (video, stream, granularity), entries sorted.

    The class count K must be consistent across the whole file.
    """
    groups: dict[tuple[str, str, str], list[ClipScore]] = {}
    file_k = None
    for line_no, record in _iter_records(path):
        vid = _field(path, line_no, record, "video_id", str, "a string")
        stream = _field(path, line_no, record, "stream", str, "a string")
        if stream not in STREAMS:
            raise VocabularyError(path, line_no, "stream", f"unknown stream {stream!r}, expected one of {list(STREAMS)}")
        gran = _field(path, line_no, record, "granularity", str, "a string")
        if gran not in GRANULARITIES:
            raise VocabularyError(path, line_no, "granularity", f"unknown granularity {gran!r}, expected one of {list(GRANULARITIES)}")
        crop = _field(path, line_no, record, "crop_id", str, "a string")
        if crop not in FIXED_CROPS:
            raise VocabularyError(path, line_no, "crop_id", f"unknown crop_id {crop!r}, expected one of {list(FIXED_CROPS)}")
        kind = _field(path, line_no, record, "kind", str, "a string")
        if kind not in KINDS:
            raise VocabularyError(path, line_no, "kind", f"unknown kind {kind!r}, expected one of {list(KINDS)}")
        clip_start = _field(path, line_no, record, "clip_start", int, "an integer")
        values = _field(path, line_no, record, "values", list, "an array")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(path, line_no, "values", f"expected numbers, got {v!r}")
        if file_k is None:
            file_k = len(values)
        elif len(values) != file_k:
            raise ParseError(
                path, line_no, "values",
                f"class count {len(values)} differs from {file_k} seen earlier in the file",
            )
        try:
            entry = ClipScore(
                clip_start=clip_start,
                crop_id=crop,
                vector=ScoreVector(values=tuple(float(v) for v in values), kind=kind),
            )
        except ValueError as exc:
            raise ParseError(path, line_no, "values", str(exc)) from exc
        groups.setdefault((vid, stream, gran), []).append(entry)
    sets = []
    for (vid, stream, gran), entries in groups.items():
        entries.sort(key=lambda e: (e.clip_start, e.crop_id))
        try:
            sets.append(
                StreamScoreSet(video_id=vid, stream=stream, granularity=gran, entries=tuple(entries))
            )
        except ValueError as exc:
            raise ParseError(path, None, None, f"video {vid!r} {stream}/{gran}: {exc}") from exc
    return sets


def write_tubes(path, tubes: Iterable[VideoTube]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vid, tube in tubes:
            record = {
                "video_id": vid,
                "label": tube.label,
                "start": tube.span.start,
                "end": tube.span.end,
            }
            if tube.score is not None:
                record["score"] = quantize(tube.score)
            record["boxes"] = [
                [quantize(b.x1), quantize(b.y1), quantize(b.x2), quantize(b.y2)]
                for b in tube.boxes
            ]
            fh.write(_dump(record) + "\n")


def read_tubes(path) -> list[VideoTube]:
    """Tube records in file order; used for ground truth and predictions alike."""
    tubes: list[VideoTube] = []
    for line_no, record in _iter_records(path):
        vid = _field(path, line_no, record, "video_id", str, "a string")
        start = _field(path, line_no, record, "start", int, "an integer")
        end = _field(path, line_no, record, "end", int, "an integer")
        label = record.get("label")
        if label is not None and (isinstance(label, bool) or not isinstance(label, int)):
            raise ParseError(path, line_no, "label", f"expected an integer or null, got {label!r}")
        score = record.get("score")
        if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
            raise ParseError(path, line_no, "score", f"expected a number, got {score!r}")
        raw_boxes = _field(path, line_no, record, "boxes", list, "an array")
        try:
            span = TemporalSpan(start, end)
        except ValueError as exc:
            raise ParseError(path, line_no, "start", str(exc)) from exc
        if len(raw_boxes) != span.length:
            raise ParseError(
                path, line_no, "boxes",
                f"{len(raw_boxes)} boxes for a span of length {span.length}",
            )
        boxes = []
        for i, rb in enumerate(raw_boxes):
            if not isinstance(rb, list) or len(rb) != 4:
                raise ParseError(path, line_no, "boxes", f"expected [x1,y1,x2,y2], got {rb!r}")
            for v in rb:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ParseError(path, line_no, "boxes", f"expected numbers, got {v!r}")
            try:
                boxes.append(
                    Box2D(x1=float(rb[0]), y1=float(rb[1]), x2=float(rb[2]), y2=float(rb[3]), frame=start + i)
                )
            except ValueError as exc:
                raise ParseError(path, line_no, "boxes", str(exc)) from exc
        tubes.append(
            (vid, Tube(span=span, boxes=tuple(boxes), label=label, score=None if score is None else float(score)))
        )
    return tubes


def write_report(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for delta in report.deltas:
            for result in report.per_delta[delta]:
                fh.write(
                    _dump(
                        {
                            "delta": quantize(delta),
                            "class": result.label,
                            "ap": quantize(result.ap),
                            "pr": [[quantize(r), quantize(p)] for r, p in result.pr],
                            "map": quantize(report.map_by_delta[delta]),
                        }
                    )
                    + "\n"
                )


def read_report(path) -> list[dict]:
    """Raw report records, mainly for tests and downstream tooling."""
    rows = []
    for line_no, record in _iter_records(path):
        for key in ("delta", "class", "ap", "pr", "map"):
            if key not in record:
                raise ParseError(path, line_no, key, "missing required field")
        rows.append(record)
    return rows


def write_predictions(path, rows: Iterable[tuple[str, int, Sequence[float]]]) -> None:
    """Per-video fused label and score vector, as emitted by the fuse command."""
    with open(path, "w", encoding="utf-8") as fh:
        for vid, label, values in rows:
            fh.write(
                _dump({"video_id": vid, "label": label, "values": [quantize(v) for v in values]})
                + "\n"
            )


def read_predictions(path) -> list[tuple[str, int, list[float]]]:
    rows = []
    for line_no, record in _iter_records(path):
        vid = _field(path, line_no, record, "video_id", str, "a string")
        label = _field(path, line_no, record, "label", int, "an integer")
        values = _field(path, line_no, record, "values", list, "an array")
        rows.append((vid, label, [float(v) for v in values]))
    return rows


def write_actionness(path, rows: Iterable[dict]) -> None:
    """Per-video actionness record with series, gate, spans and tube sums."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                _dump(
                    {
                        "video_id": row["video_id"],
                        "class": row["class"],
                        "threshold": quantize(row["threshold"]),
                        "series": [quantize(v) for v in row["series"]],
                        "human": [bool(h) for h in row["human"]],
                        "spans": [[s, e] for s, e in row["spans"]],
                        "tube_sums": [quantize(v) for v in row["tube_sums"]],
                    }
                )
                + "\n"
            )
