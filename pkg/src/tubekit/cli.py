"""Command-line pipeline: extract-tubes, fuse, actionness, evaluate, synth.

Exit codes: 0 on success, 2 on input/parse errors, 3 on flag/validation
errors. Machine-readable results go to files; human-readable tables go to
standard output. Per-video work items are independent, so --parallel N
changes wall time but never the output bytes (assembly is sorted by
video id).
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .errors import ParseError
from .evaluation import AP_METHOD, EvalConfig, video_map
from .formats import (
    read_detections,
    read_scores,
    read_tubes,
    write_actionness,
    write_detections,
    write_predictions,
    write_report,
    write_scores,
    write_tubes,
)
from .fusion import (
    CROP_SCHEMES,
    FUSION_METHODS,
    GRANULARITIES,
    STREAMS,
    StreamScoreSet,
    aggregate_video,
    compose_actionness,
    frame_scores_from_clips,
    multigranular_fuse,
    softmax,
    temporal_localize,
    tube_actionness,
)
from .linking import ExtractionConfig, extract_tubes
from .synth import SynthConfig, generate_video

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FLAGS = 3


class _FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; flag errors are exit 3 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _FlagError(message)


def _check_input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ParseError(path, message="input file does not exist")
    return p


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _cmd_extract_tubes(args) -> int:
    _require(args.min_tube_len >= 1, "--min-tube-len must be >= 1")
    _require(args.median_window >= 1, "--median-window must be >= 1")
    _require(args.parallel >= 1, "--parallel must be >= 1")
    videos = read_detections(_check_input(args.detections))
    videos.sort(key=lambda d: d.video_id)
    cfg = ExtractionConfig(min_tube_len=args.min_tube_len, median_window=args.median_window)
    per_video = _pmap(lambda d: extract_tubes(d, cfg), videos, args.parallel)
    rows = [(d.video_id, t) for d, tubes in zip(videos, per_video) for t in tubes]
    write_tubes(args.out, rows)
    return EXIT_OK


def _select_units(sets: list[StreamScoreSet], video_id: str, stream: str, gran: str, crops):
    units = []
    for s in sets:
        if s.video_id == video_id and s.stream == stream and s.granularity == gran:
            units.extend(e.vector for e in s.entries if e.crop_id in crops)
    return units


def _cmd_fuse(args) -> int:
    _require(args.parallel >= 1, "--parallel must be >= 1")
    grans = [g.strip() for g in args.granularities.split(",") if g.strip()]
    _require(bool(grans), "--granularities must name at least one granularity")
    for g in grans:
        _require(g in GRANULARITIES, f"unknown granularity {g!r}")
    _require(len(set(grans)) == len(grans), "--granularities lists a granularity twice")
    crops = CROP_SCHEMES[args.crop_scheme]
    sets = read_scores(_check_input(args.scores))
    video_ids = sorted({s.video_id for s in sets})
    if not video_ids:
        raise ParseError(args.scores, message="no score records found")

    def fuse_one(vid: str):
        fused_per_gran = []
        label = None
        for gran in grans:
            units = _select_units(sets, vid, args.stream, gran, crops)
            if not units:
                raise ParseError(
                    args.scores,
                    message=f"video {vid!r} has no {args.stream}/{gran} scores for crop scheme {args.crop_scheme!r}",
                )
            label, fused = aggregate_video(units, args.method)
            fused_per_gran.append(fused)
        if len(fused_per_gran) > 1:
            final = multigranular_fuse(fused_per_gran)
            label = final.argmax()
        else:
            final = fused_per_gran[0]
        return vid, label, final.values

    rows = _pmap(fuse_one, video_ids, args.parallel)
    write_predictions(args.out, rows)
    return EXIT_OK


def _frame_probs(sets, vid, stream, gran, length, scores_path, cls):
    per_stream = [s for s in sets if s.video_id == vid and s.stream == stream and s.granularity == gran]
    if not per_stream:
        raise ParseError(scores_path, message=f"missing stream {stream!r} ({gran}) for video {vid!r}")
    merged = per_stream[0]
    if len(per_stream) > 1:
        entries = tuple(e for s in per_stream for e in s.entries)
        merged = StreamScoreSet(video_id=vid, stream=stream, granularity=gran, entries=entries)
    frame_vecs = frame_scores_from_clips(merged, length)
    probs = []
    for vec in frame_vecs:
        if vec.kind == "raw":
            vec = softmax(vec)
        probs.append(vec.values[cls])
    return probs


def _cmd_actionness(args) -> int:
    _require((args.detections is None) != (args.tubes is None),
             "exactly one of --detections and --tubes is required")
    _require(args.granularity in GRANULARITIES, f"unknown granularity {args.granularity!r}")
    _require(math.isfinite(args.threshold), "--threshold must be finite")
    _require(args.action_class >= 0, "--class must be >= 0")
    sets = read_scores(_check_input(args.scores))
    if not sets:
        raise ParseError(args.scores, message="no score records found")
    k = sets[0].k
    _require(args.action_class < k, f"--class must be < {k} (class count of the scores file)")

    # human-presence gate per video: either detection boxes or tube coverage
    gates: dict[str, list[bool]] = {}
    tubes_by_video: dict[str, list] = {}
    if args.detections is not None:
        for dets in read_detections(_check_input(args.detections)):
            gates[dets.video_id] = [len(dets.boxes_on(f)) > 0 for f in range(dets.length)]
    else:
        for vid, tube in read_tubes(_check_input(args.tubes)):
            tubes_by_video.setdefault(vid, []).append(tube)
        for vid, tubes in tubes_by_video.items():
            human = [False] * (max(t.span.end for t in tubes) + 1)
            for tube in tubes:
                for f in tube.span.frames():
                    human[f] = True
            gates[vid] = human

    rows = []
    for vid in sorted(gates):
        human = gates[vid]
        length = len(human)
        pose = _frame_probs(sets, vid, "pose", args.granularity, length, args.scores, args.action_class)
        rgb = _frame_probs(sets, vid, "rgb", args.granularity, length, args.scores, args.action_class)
        flow = _frame_probs(sets, vid, "flow", args.granularity, length, args.scores, args.action_class)
        series = compose_actionness(pose, rgb, flow, human)
        spans = temporal_localize(series, args.threshold)
        sums = [tube_actionness(t, series) for t in tubes_by_video.get(vid, [])]
        rows.append(
            {
                "video_id": vid,
                "class": args.action_class,
                "threshold": args.threshold,
                "series": series.values,
                "human": series.human_present,
                "spans": [(s.start, s.end) for s in spans],
                "tube_sums": sums,
            }
        )
    write_actionness(args.out, rows)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    try:
        deltas = tuple(float(d) for d in args.deltas.split(","))
        cfg = EvalConfig(deltas=deltas)
    except ValueError as exc:
        raise _FlagError(f"bad --deltas: {exc}") from exc
    preds = read_tubes(_check_input(args.predictions))
    gts = read_tubes(_check_input(args.gt))
    for vid, tube in preds:
        if tube.label is None:
            raise ParseError(args.predictions, message=f"prediction in video {vid!r} has no label")
        if tube.score is None:
            raise ParseError(args.predictions, message=f"prediction in video {vid!r} has no score")
    for vid, tube in gts:
        if tube.label is None:
            raise ParseError(args.gt, message=f"ground-truth tube in video {vid!r} has no label")
    report = video_map(preds, gts, cfg)
    write_report(args.out, report)

    classes = sorted({r.label for rs in report.per_delta.values() for r in rs})
    header = "class".ljust(8) + "".join(f"d={d:<8g}"[:9].ljust(9) for d in report.deltas)
    print(header)
    for c in classes:
        cells = []
        for d in report.deltas:
            ap = next(r.ap for r in report.per_delta[d] if r.label == c)
            cells.append(f"{ap:<9.4f}")
        print(str(c).ljust(8) + "".join(cells))
    print("mAP".ljust(8) + "".join(f"{report.map_by_delta[d]:<9.4f}" for d in report.deltas))
    print(f"(AP: {AP_METHOD})")
    return EXIT_OK


def _cmd_synth(args) -> int:
    _require(args.parallel >= 1, "--parallel must be >= 1")
    try:
        cfg = SynthConfig(
            seed=args.seed,
            videos=args.videos,
            frames=args.frames,
            persons=args.persons,
            jitter=args.jitter,
            fp_rate=args.fp_rate,
            miss_rate=args.miss_rate,
            classes=args.classes,
            noise=args.noise,
        )
    except ValueError as exc:
        raise _FlagError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = _pmap(lambda i: generate_video(cfg, i), list(range(cfg.videos)), args.parallel)
    detections = [dets for dets, _, _ in results]
    gt = [row for _, rows, _ in results for row in rows]
    scores = [s for _, _, sets in results for s in sets]
    write_detections(out_dir / "detections.jsonl", detections)
    write_tubes(out_dir / "gt_tubes.jsonl", gt)
    write_scores(out_dir / "scores.jsonl", scores)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tubekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-tubes", parents=[], help="link detections into action tubes")
    p.add_argument("detections", help="detections file (JSON lines)")
    p.add_argument("--out", required=True, help="output tubes file")
    p.add_argument("--min-tube-len", type=int, default=5)
    p.add_argument("--median-window", type=int, default=80)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(handler=_cmd_extract_tubes)

    p = sub.add_parser("fuse", help="fuse clip scores into per-video predictions")
    p.add_argument("scores", help="scores file (JSON lines)")
    p.add_argument("--out", required=True, help="output predictions file")
    p.add_argument("--method", choices=FUSION_METHODS, default="mean")
    p.add_argument("--crop-scheme", choices=sorted(CROP_SCHEMES), default="center")
    p.add_argument("--stream", choices=STREAMS, default="rgb")
    p.add_argument("--granularities", default="net16",
                   help="comma-separated subset of net16,net32,netW to average")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(handler=_cmd_fuse)

    p = sub.add_parser("actionness", help="per-frame actionness, spans and tube sums")
    p.add_argument("--scores", required=True)
    p.add_argument("--detections", help="detections file; frames with a box count as human-present")
    p.add_argument("--tubes", help="tubes file; alternative human gate and per-tube sums")
    p.add_argument("--class", dest="action_class", type=int, required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--granularity", default="net16")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_actionness)

    p = sub.add_parser("evaluate", help="video-mAP of predicted tubes against ground truth")
    p.add_argument("predictions", help="predicted tubes file")
    p.add_argument("gt", help="ground-truth tubes file")
    p.add_argument("--deltas", default="0.05,0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--out", required=True, help="output report file")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic corpus with known ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--videos", type=int, default=10)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--persons", type=int, default=2)
    p.add_argument("--jitter", type=float, default=2.0)
    p.add_argument("--fp-rate", type=float, default=0.1)
    p.add_argument("--miss-rate", type=float, default=0.05)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(handler=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_FLAGS
    try:
        return args.handler(args)
    except _FlagError as exc:
        print(f"tubekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except ParseError as exc:
        print(f"tubekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"tubekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
