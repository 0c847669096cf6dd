"""Video-AP and mAP for labeled action tubes.

Predictions are matched greedily in descending score order to the
not-yet-matched ground-truth tube of the same video (and class) with the
highest tube IoU; a match counts as a true positive iff that IoU reaches
the threshold. AP is the area under the precision envelope of the
precision-recall curve (all-point interpolation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .geometry import Tube, tube_iou

# (video_id, tube) pairs; tubes carry their own label and score.
VideoTube = tuple[str, Tube]

AP_METHOD = "all-point precision envelope"


@dataclass(frozen=True)
class EvalConfig:
    deltas: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
    require_label_match: bool = True

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if not self.deltas:
            raise ValueError("no IoU thresholds given")
        for d in self.deltas:
            if not 0.0 < d <= 1.0:
                raise ValueError(f"IoU threshold {d} outside (0, 1]")


@dataclass(frozen=True)
class ClassResult:
    label: int
    ap: float
    num_gt: int
    tp: int
    fp: int
    pr: tuple[tuple[float, float], ...]  # (recall, precision) per prediction rank


@dataclass(frozen=True)
class EvalReport:
    deltas: tuple[float, ...]
    per_delta: dict[float, tuple[ClassResult, ...]]
    map_by_delta: dict[float, float]
    ap_method: str = AP_METHOD


def _check_scored(preds: Sequence[VideoTube]) -> None:
    for vid, tube in preds:
        if tube.score is None or not math.isfinite(tube.score):
            raise ValueError(f"prediction in video {vid!r} has no finite score")


def _score_order(preds: Sequence[VideoTube], indices: Sequence[int]) -> list[int]:
    return sorted(indices, key=lambda i: (-preds[i][1].score, i))


def _greedy_flags(
    preds: Sequence[VideoTube],
    ordered: Sequence[int],
    gts: Sequence[VideoTube],
    delta: float,
) -> list[bool]:
    """TP/FP per prediction of ``ordered``; each ground truth matches once."""
    matched = [False] * len(gts)
    flags: list[bool] = []
    for i in ordered:
        vid, tube = preds[i]
        best_iou, best_g = 0.0, None
        for g, (gvid, gtube) in enumerate(gts):
            if matched[g] or gvid != vid:
                continue
            iou = tube_iou(tube, gtube)
            if iou > best_iou:
                best_iou, best_g = iou, g
        if best_g is not None and best_iou >= delta:
            matched[best_g] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def match_predictions(
    preds: Sequence[VideoTube],
    gts: Sequence[VideoTube],
    delta: float,
    require_label_match: bool = True,
) -> list[bool]:
    """TP/FP flag per prediction, aligned with the input order of ``preds``."""
    _check_scored(preds)
    flags = [False] * len(preds)
    if require_label_match:
        groups: dict[int, list[int]] = {}
        for i, (_, tube) in enumerate(preds):
            groups.setdefault(tube.label, []).append(i)
        for label, indices in groups.items():
            class_gts = [(v, t) for v, t in gts if t.label == label]
            ordered = _score_order(preds, indices)
            for i, flag in zip(ordered, _greedy_flags(preds, ordered, class_gts, delta)):
                flags[i] = flag
    else:
        ordered = _score_order(preds, range(len(preds)))
        for i, flag in zip(ordered, _greedy_flags(preds, ordered, list(gts), delta)):
            flags[i] = flag
    return flags


def average_precision(flags: Sequence[bool], num_gt: int) -> Optional[float]:
    """Area under the precision envelope; flags must be in descending-score order.

    With no ground truth the AP is undefined (None) unless there are
    predictions, which are then all false positives and score 0.
    """
    if num_gt < 0:
        raise ValueError(f"negative ground-truth count {num_gt}")
    if num_gt == 0:
        return 0.0 if flags else None
    if not flags:
        return 0.0
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        if flag:
            tp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / k)
    envelope = list(precisions)
    for k in range(len(envelope) - 2, -1, -1):
        if envelope[k + 1] > envelope[k]:
            envelope[k] = envelope[k + 1]
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, envelope):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def _pr_points(flags: Sequence[bool], num_gt: int) -> tuple[tuple[float, float], ...]:
    pts = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        if flag:
            tp += 1
        pts.append((tp / num_gt if num_gt else 0.0, tp / k))
    return tuple(pts)


def video_map(
    preds: Sequence[VideoTube],
    gts: Sequence[VideoTube],
    cfg: EvalConfig,
) -> EvalReport:
    """Per-class AP and mAP at every configured IoU threshold.

    mAP averages only classes with at least one ground-truth tube; classes
    that appear only in the predictions are reported with AP 0 but do not
    enter the mean. Without label matching everything is pooled into a
    single pseudo-class reported with label -1.
    """
    _check_scored(preds)
    for vid, tube in gts:
        if tube.label is None:
            raise ValueError(f"ground-truth tube in video {vid!r} has no label")
    if cfg.require_label_match:
        for vid, tube in preds:
            if tube.label is None:
                raise ValueError(f"prediction in video {vid!r} has no label")
        classes = sorted({t.label for _, t in gts} | {t.label for _, t in preds})
        class_preds = {
            c: [i for i, (_, t) in enumerate(preds) if t.label == c] for c in classes
        }
        class_gts = {c: [(v, t) for v, t in gts if t.label == c] for c in classes}
    else:
        classes = [-1]
        class_preds = {-1: list(range(len(preds)))}
        class_gts = {-1: list(gts)}

    per_delta: dict[float, tuple[ClassResult, ...]] = {}
    map_by_delta: dict[float, float] = {}
    for delta in cfg.deltas:
        results = []
        for c in classes:
            ordered = _score_order(preds, class_preds[c])
            flags = _greedy_flags(preds, ordered, class_gts[c], delta)
            num_gt = len(class_gts[c])
            ap = average_precision(flags, num_gt)
            results.append(
                ClassResult(
                    label=c,
                    ap=0.0 if ap is None else ap,
                    num_gt=num_gt,
                    tp=sum(flags),
                    fp=len(flags) - sum(flags),
                    pr=_pr_points(flags, num_gt),
                )
            )
        scored = [r.ap for r in results if r.num_gt > 0]
        per_delta[delta] = tuple(results)
        map_by_delta[delta] = math.fsum(scored) / len(scored) if scored else 0.0
    return EvalReport(deltas=cfg.deltas, per_delta=per_delta, map_by_delta=map_by_delta)
