"""Box and tube geometry.

Boxes are continuous half-open rectangles [x1, x2) x [y1, y2) so that area
and IoU arithmetic is exact for integer-lattice inputs. Temporal spans are
inclusive integer frame ranges. Everything here is immutable and pure.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Optional


@dataclass(frozen=True)
class Box2D:
    """One axis-aligned detection rectangle on one frame."""

    x1: float
    y1: float
    x2: float
    y2: float
    frame: int = 0
    score: Optional[float] = None

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "x1 < x2 and y1 < y2 required"
            )
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class TemporalSpan:
    """Inclusive frame range [start, end]."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0:
            raise ValueError(f"negative start frame {self.start}")
        if self.start > self.end:
            raise ValueError(f"empty span [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def frames(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class Tube:
    """A per-frame-contiguous sequence of boxes, one box per frame of span."""

    span: TemporalSpan
    boxes: tuple[Box2D, ...]
    label: Optional[int] = None
    score: Optional[float] = None

    def __post_init__(self):
        if len(self.boxes) != self.span.length:
            raise ValueError(
                f"tube has {len(self.boxes)} boxes for a span of length {self.span.length}"
            )
        for i, box in enumerate(self.boxes):
            if box.frame != self.span.start + i:
                raise ValueError(
                    f"box {i} carries frame {box.frame}, expected {self.span.start + i}"
                )

    def box_at(self, frame: int) -> Box2D:
        return self.boxes[frame - self.span.start]


def box_iou(a: Box2D, b: Box2D) -> float:
    """Spatial intersection-over-union of two boxes; frame indices ignored."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    if iw <= 0.0:
        return 0.0
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def temporal_iou(a: TemporalSpan, b: TemporalSpan) -> float:
    """IoU of two inclusive frame ranges, counted over integer frames."""
    inter = min(a.end, b.end) - max(a.start, b.start) + 1
    if inter <= 0:
        return 0.0
    return inter / (a.length + b.length - inter)


def tube_iou(p: Tube, g: Tube) -> float:
    """Spatio-temporal tube overlap.

    Temporal IoU of the two spans multiplied by the mean spatial IoU of the
    per-frame box pairs over the temporally overlapping frames. Zero when
    the spans do not overlap (the spatial average is vacuous then).
    """
    t = temporal_iou(p.span, g.span)
    if t == 0.0:
        return 0.0
    lo = max(p.span.start, g.span.start)
    hi = min(p.span.end, g.span.end)
    ious = [box_iou(p.box_at(f), g.box_at(f)) for f in range(lo, hi + 1)]
    return t * (fsum(ious) / len(ious))
