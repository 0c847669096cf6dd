"""Score-level arithmetic: softmax, aggregation, actionness, localization.

All means use exactly-rounded summation (math.fsum), which makes the
aggregations permutation invariant down to the last bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import TemporalSpan, Tube

STREAMS = ("pose", "flow", "rgb")
GRANULARITIES = ("net16", "net32", "netW")
KINDS = ("raw", "prob")
FUSION_METHODS = ("mean", "max", "majority")
CENTER_CROPS = ("center", "center_flip")
FIXED_CROPS = CENTER_CROPS + (
    "tl", "tl_flip", "tr", "tr_flip", "bl", "bl_flip", "br", "br_flip",
)
CROP_SCHEMES = {"center": CENTER_CROPS, "fixed": FIXED_CROPS}

_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ScoreVector:
    """K class scores, either raw logits or a probability distribution."""

    values: tuple[float, ...]
    kind: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) == 0:
            raise ValueError("empty score vector")
        if self.kind not in KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite score value {v!r}")
        if self.kind == "prob":
            if any(v < 0.0 for v in self.values):
                raise ValueError("probability vector with negative entries")
            total = math.fsum(self.values)
            if abs(total - 1.0) > _PROB_SUM_TOL:
                raise ValueError(f"probability vector sums to {total}, not 1")

    @property
    def k(self) -> int:
        return len(self.values)

    def argmax(self) -> int:
        best = 0
        for i in range(1, len(self.values)):
            if self.values[i] > self.values[best]:
                best = i
        return best


@dataclass(frozen=True)
class ClipScore:
    clip_start: int
    crop_id: str
    vector: ScoreVector

    def __post_init__(self):
        if self.clip_start < 0:
            raise ValueError(f"negative clip_start {self.clip_start}")
        if self.crop_id not in FIXED_CROPS:
            raise ValueError(f"unknown crop_id {self.crop_id!r}")


@dataclass(frozen=True)
class StreamScoreSet:
    """Per-clip, per-crop scores of one stream of one video."""

    video_id: str
    stream: str
    granularity: str
    entries: tuple[ClipScore, ...]
    clip_len: int = 16
    stride: int = 8

    def __post_init__(self):
        if self.stream not in STREAMS:
            raise ValueError(f"unknown stream {self.stream!r}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.clip_len < 1 or self.stride < 1:
            raise ValueError("clip_len and stride must be >= 1")
        if self.entries:
            k = self.entries[0].vector.k
            kind = self.entries[0].vector.kind
            for e in self.entries:
                if e.vector.k != k:
                    raise ValueError(f"mixed class counts: {e.vector.k} vs {k}")
                if e.vector.kind != kind:
                    raise ValueError("mixed raw/prob score kinds in one set")

    @property
    def k(self) -> int:
        return self.entries[0].vector.k if self.entries else 0

    @property
    def kind(self) -> str:
        return self.entries[0].vector.kind if self.entries else "raw"


@dataclass(frozen=True)
class ActionnessSeries:
    """Per-frame actionness of one class plus the human-presence gate."""

    values: tuple[float, ...]
    human_present: tuple[bool, ...]

    def __post_init__(self):
        if len(self.values) != len(self.human_present):
            raise ValueError(
                f"{len(self.values)} scores vs {len(self.human_present)} presence flags"
            )

    def __len__(self) -> int:
        return len(self.values)


def softmax(v: ScoreVector) -> ScoreVector:
    """Exponential normalization, shifted by the max for overflow safety."""
    m = max(v.values)
    exps = [math.exp(x - m) for x in v.values]
    total = math.fsum(exps)
    return ScoreVector(values=tuple(e / total for e in exps), kind="prob")


def _mean_kind(vectors: Sequence[ScoreVector]) -> str:
    return "prob" if all(v.kind == "prob" for v in vectors) else "raw"


def _elementwise_mean(vectors: Sequence[ScoreVector]) -> ScoreVector:
    n = len(vectors)
    k = vectors[0].k
    values = tuple(math.fsum(v.values[c] for v in vectors) / n for c in range(k))
    return ScoreVector(values=values, kind=_mean_kind(vectors))


def _check_units(units: Sequence[ScoreVector], what: str) -> None:
    if not units:
        raise ValueError(f"no score vectors to {what}")
    k = units[0].k
    for u in units:
        if u.k != k:
            raise ValueError(f"mixed class counts: {u.k} vs {k}")


def aggregate_video(units: Sequence[ScoreVector], method: str) -> tuple[int, ScoreVector]:
    """Fuse the clip-by-crop score vectors of one video into a label.

    mean and max fuse elementwise and take the argmax. Majority voting
    counts per-unit argmax votes; ties between classes go to the one with
    the higher mean score, and the fused vector is the normalized vote
    histogram (the only confidence signal voting produces).
    """
    _check_units(units, "aggregate")
    if method == "mean":
        fused = _elementwise_mean(units)
        return fused.argmax(), fused
    if method == "max":
        k = units[0].k
        values = tuple(max(u.values[c] for u in units) for c in range(k))
        fused = ScoreVector(values=values, kind="raw")
        return fused.argmax(), fused
    if method == "majority":
        k = units[0].k
        votes = [0] * k
        for u in units:
            votes[u.argmax()] += 1
        top = max(votes)
        tied = [c for c in range(k) if votes[c] == top]
        if len(tied) > 1:
            means = {c: math.fsum(u.values[c] for u in units) for c in tied}
            tied.sort(key=lambda c: (-means[c], c))
        label = tied[0]
        n = len(units)
        fused = ScoreVector(values=tuple(v / n for v in votes), kind="prob")
        return label, fused
    raise ValueError(f"unknown fusion method {method!r}")


def multigranular_fuse(vectors: Sequence[ScoreVector]) -> ScoreVector:
    """Average the fused vectors of up to three temporal granularities."""
    if not 1 <= len(vectors) <= 3:
        raise ValueError(f"expected 1 to 3 vectors, got {len(vectors)}")
    _check_units(vectors, "fuse")
    return _elementwise_mean(vectors)


def frame_scores_from_clips(scores: StreamScoreSet, video_len: int) -> list[ScoreVector]:
    """Distribute clip-level scores to every frame of the video.

    Each clip contributes its crop-mean vector to the frames it covers. A
    frame covered by several clips gets their arithmetic mean, and a frame
    covered by none gets the vector of the nearest covering clip (earlier
    clip wins distance ties).
    """
    if video_len <= 0:
        raise ValueError(f"video_len must be positive, got {video_len}")
    if not scores.entries:
        raise ValueError("score set has no entries")
    by_start: dict[int, list[ScoreVector]] = {}
    for e in scores.entries:
        by_start.setdefault(e.clip_start, []).append(e.vector)
    clips = sorted((start, _elementwise_mean(vs)) for start, vs in by_start.items())
    clip_len = scores.clip_len

    out: list[ScoreVector] = []
    for f in range(video_len):
        covering = [vec for start, vec in clips if start <= f < start + clip_len]
        if covering:
            out.append(covering[0] if len(covering) == 1 else _elementwise_mean(covering))
            continue
        best_vec, best_dist = None, None
        for start, vec in clips:
            dist = start - f if f < start else f - (start + clip_len - 1)
            if best_dist is None or dist < best_dist:
                best_vec, best_dist = vec, dist
        out.append(best_vec)
    return out


def actionness(s_pose: float, s_rgb: float, s_flow: float) -> float:
    """Per-frame actionness: squared pose score times cube roots of the others."""
    for name, v in (("s_pose", s_pose), ("s_rgb", s_rgb), ("s_flow", s_flow)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    return (s_pose * s_pose) * s_rgb ** (1.0 / 3.0) * s_flow ** (1.0 / 3.0)


def compose_actionness(
    pose: Sequence[float],
    rgb: Sequence[float],
    flow: Sequence[float],
    human_present: Sequence[bool],
) -> ActionnessSeries:
    if not len(pose) == len(rgb) == len(flow) == len(human_present):
        raise ValueError("per-frame inputs have mismatched lengths")
    values = tuple(actionness(p, r, f) for p, r, f in zip(pose, rgb, flow))
    return ActionnessSeries(values=values, human_present=tuple(bool(h) for h in human_present))


def tube_actionness(tube: Tube, series: ActionnessSeries) -> float:
    """Sum of the per-frame actionness over the tube's frames."""
    if tube.span.start < 0 or tube.span.end >= len(series):
        raise ValueError(
            f"tube span [{tube.span.start}, {tube.span.end}] outside series of length {len(series)}"
        )
    return math.fsum(series.values[f] for f in tube.span.frames())


def temporal_localize(series: ActionnessSeries, threshold: float) -> list[TemporalSpan]:
    """Maximal runs of frames above threshold while a human is present."""
    if not math.isfinite(threshold):
        raise ValueError(f"non-finite threshold {threshold!r}")
    spans: list[TemporalSpan] = []
    start: Optional[int] = None
    for t in range(len(series)):
        hit = series.human_present[t] and series.values[t] >= threshold
        if hit:
            if start is None:
                start = t
        elif start is not None:
            spans.append(TemporalSpan(start, t - 1))
            start = None
    if start is not None:
        spans.append(TemporalSpan(start, len(series) - 1))
    return spans
