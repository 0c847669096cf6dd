import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tubekit import (
    ActionnessSeries,
    Box2D,
    ClipScore,
    ScoreVector,
    StreamScoreSet,
    TemporalSpan,
    Tube,
    actionness,
    aggregate_video,
    compose_actionness,
    frame_scores_from_clips,
    multigranular_fuse,
    softmax,
    temporal_localize,
    tube_actionness,
)

finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=8).map(lambda v: ScoreVector(tuple(v)))


@st.composite
def unit_lists(draw, min_units=1, max_units=6):
    k = draw(st.integers(1, 6))
    n = draw(st.integers(min_units, max_units))
    return [
        ScoreVector(tuple(draw(st.lists(finite, min_size=k, max_size=k))))
        for _ in range(n)
    ]


class TestSoftmax:
    def test_symmetric_pair(self):
        assert softmax(ScoreVector((0.0, 0.0))).values == (0.5, 0.5)

    def test_constant_vector_is_uniform(self):
        out = softmax(ScoreVector((3.7,) * 4))
        assert out.values == (0.25, 0.25, 0.25, 0.25)

    def test_reference_values(self):
        out = softmax(ScoreVector((1.0, 2.0, 3.0)))
        expected = (0.09003057317038046, 0.24472847105479767, 0.6652409557748219)
        for got, ref in zip(out.values, expected):
            assert got == pytest.approx(ref, abs=1e-12)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ScoreVector((float("inf"), 0.0))

    def test_large_logits_do_not_overflow(self):
        out = softmax(ScoreVector((1000.0, 999.0)))
        assert math.isfinite(out.values[0])

    @given(vectors)
    def test_normalized(self, v):
        assert abs(math.fsum(softmax(v).values) - 1.0) <= 1e-9

    @given(vectors, st.floats(min_value=-30, max_value=30))
    def test_shift_invariant(self, v, c):
        shifted = ScoreVector(tuple(x + c for x in v.values))
        for a, b in zip(softmax(v).values, softmax(shifted).values):
            assert a == pytest.approx(b, abs=1e-9)

    @given(st.lists(st.integers(-5000, 5000).map(lambda i: i / 100), min_size=1, max_size=8))
    def test_argmax_preserved(self, values):
        # quantized logits: differences below one float ulp of exp() would
        # collapse to equal probabilities and make the argmax ambiguous
        v = ScoreVector(tuple(values))
        assert softmax(v).argmax() == v.argmax()


class TestAggregateVideo:
    UNITS = [ScoreVector((0.2, 0.8), kind="prob"), ScoreVector((0.4, 0.6), kind="prob")]

    def test_mean(self):
        label, fused = aggregate_video(self.UNITS, "mean")
        assert label == 1
        assert fused.values == pytest.approx((0.3, 0.7))

    def test_max(self):
        label, fused = aggregate_video(self.UNITS, "max")
        assert label == 1
        assert fused.values == (0.4, 0.8)

    def test_majority(self):
        units = [
            ScoreVector((0.1, 0.9), kind="prob"),
            ScoreVector((0.3, 0.7), kind="prob"),
            ScoreVector((0.8, 0.2), kind="prob"),
        ]
        label, fused = aggregate_video(units, "majority")
        assert label == 1
        assert fused.values == pytest.approx((1 / 3, 2 / 3))

    def test_majority_tie_goes_to_higher_mean(self):
        units = [ScoreVector((0.9, 0.1), kind="prob"), ScoreVector((0.2, 0.8), kind="prob")]
        label, _ = aggregate_video(units, "majority")
        assert label == 0  # means: 0.55 vs 0.45

    def test_empty_units_rejected(self):
        with pytest.raises(ValueError):
            aggregate_video([], "mean")

    def test_mixed_k_rejected(self):
        with pytest.raises(ValueError):
            aggregate_video([ScoreVector((1.0,)), ScoreVector((1.0, 2.0))], "mean")

    @given(unit_lists(), st.randoms(use_true_random=False))
    def test_mean_max_permutation_invariant(self, units, rnd):
        shuffled = list(units)
        rnd.shuffle(shuffled)
        for method in ("mean", "max"):
            la, va = aggregate_video(units, method)
            lb, vb = aggregate_video(shuffled, method)
            assert la == lb
            assert va.values == vb.values  # exact, thanks to fsum

    @given(unit_lists(), st.randoms(use_true_random=False))
    def test_majority_label_permutation_invariant(self, units, rnd):
        shuffled = list(units)
        rnd.shuffle(shuffled)
        assert aggregate_video(units, "majority")[0] == aggregate_video(shuffled, "majority")[0]

    @given(unit_lists(), st.floats(min_value=0.1, max_value=10))
    def test_label_invariant_under_positive_scaling(self, units, scale):
        scaled = [ScoreVector(tuple(x * scale for x in u.values)) for u in units]
        assert aggregate_video(units, "mean")[0] == aggregate_video(scaled, "mean")[0]


class TestMultigranularFuse:
    def test_identical_inputs_pass_through(self):
        v = ScoreVector((1.0, 2.0))
        assert multigranular_fuse([v, v, v]).values == (1.0, 2.0)

    def test_two_vectors_average(self):
        out = multigranular_fuse([ScoreVector((1.0, 0.0)), ScoreVector((0.0, 1.0))])
        assert out.values == (0.5, 0.5)

    def test_single_vector_passthrough(self):
        assert multigranular_fuse([ScoreVector((2.0, 5.0))]).values == (2.0, 5.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            multigranular_fuse([])


def score_set(entries, video_id="v", stream="rgb", granularity="net16"):
    return StreamScoreSet(
        video_id=video_id,
        stream=stream,
        granularity=granularity,
        entries=tuple(ClipScore(clip_start=s, crop_id=c, vector=v) for s, c, v in entries),
    )


class TestFrameScores:
    def test_single_clip_covers_all(self):
        s = score_set([(0, "center", ScoreVector((1.0, 3.0)))])
        frames = frame_scores_from_clips(s, 16)
        assert len(frames) == 16
        assert all(f.values == (1.0, 3.0) for f in frames)

    def test_overlap_averages(self):
        s = score_set([(0, "center", ScoreVector((1.0, 0.0))), (8, "center", ScoreVector((0.0, 1.0)))])
        frames = frame_scores_from_clips(s, 16)
        assert frames[0].values == (1.0, 0.0)
        for f in range(8, 16):
            assert frames[f].values == (0.5, 0.5)

    def test_tail_frames_take_the_later_clip(self):
        # frames 16,17 fall past the first clip but inside the second
        s = score_set([(0, "center", ScoreVector((1.0, 0.0))), (8, "center", ScoreVector((0.0, 1.0)))])
        frames = frame_scores_from_clips(s, 18)
        assert frames[16].values == (0.0, 1.0)
        assert frames[17].values == (0.0, 1.0)

    def test_uncovered_frames_take_nearest_clip(self):
        # frames 24..29 are covered by no clip; the clip at 8 ends nearest
        s = score_set([(0, "center", ScoreVector((1.0, 0.0))), (8, "center", ScoreVector((0.0, 1.0)))])
        frames = frame_scores_from_clips(s, 30)
        for f in range(24, 30):
            assert frames[f].values == (0.0, 1.0)

    def test_nearest_tie_goes_to_earlier_clip(self):
        # clips cover {0,1} and {7,8}; frame 4 is 3 frames from both
        s = StreamScoreSet(
            video_id="v", stream="rgb", granularity="net16", clip_len=2,
            entries=(
                ClipScore(0, "center", ScoreVector((1.0, 0.0))),
                ClipScore(7, "center", ScoreVector((0.0, 1.0))),
            ),
        )
        frames = frame_scores_from_clips(s, 9)
        assert frames[4].values == (1.0, 0.0)
        assert frames[5].values == (0.0, 1.0)  # one frame later the tie breaks

    def test_crops_average_before_distribution(self):
        s = score_set([(0, "center", ScoreVector((1.0, 0.0))), (0, "center_flip", ScoreVector((0.0, 1.0)))])
        frames = frame_scores_from_clips(s, 4)
        assert frames[0].values == (0.5, 0.5)

    def test_bad_video_len(self):
        s = score_set([(0, "center", ScoreVector((1.0,)))])
        with pytest.raises(ValueError):
            frame_scores_from_clips(s, 0)


class TestActionness:
    def test_all_ones(self):
        assert actionness(1.0, 1.0, 1.0) == 1.0

    def test_pose_squared(self):
        assert actionness(0.5, 1.0, 1.0) == 0.25

    def test_reference_value(self):
        assert actionness(0.9, 0.8, 0.7) == pytest.approx(0.6676, abs=1e-4)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            actionness(1.5, 0.5, 0.5)
        with pytest.raises(ValueError):
            actionness(0.5, -0.1, 0.5)

    @given(
        st.floats(min_value=1e-30, max_value=1.0),
        st.floats(min_value=1e-30, max_value=1.0),
        st.floats(min_value=1e-30, max_value=1.0),
    )
    def test_positive_for_positive_inputs(self, p, r, f):
        assert actionness(p, r, f) > 0.0

    def test_zero_iff_any_zero(self):
        assert actionness(0.0, 0.5, 0.5) == 0.0
        assert actionness(0.5, 0.0, 0.5) == 0.0
        assert actionness(0.5, 0.5, 0.0) == 0.0

    @given(
        st.floats(min_value=0, max_value=0.9),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
    )
    def test_monotone_in_pose(self, p, r, f):
        assert actionness(p + 0.1, r, f) >= actionness(p, r, f)


def make_series(values, human=None):
    if human is None:
        human = [True] * len(values)
    return ActionnessSeries(values=tuple(values), human_present=tuple(human))


class TestTubeActionness:
    def tube(self, start, end):
        boxes = tuple(Box2D(0, 0, 10, 10, frame=f) for f in range(start, end + 1))
        return Tube(span=TemporalSpan(start, end), boxes=boxes)

    def test_zero_series(self):
        assert tube_actionness(self.tube(0, 4), make_series([0.0] * 5)) == 0.0

    def test_constant_series(self):
        assert tube_actionness(self.tube(0, 9), make_series([0.5] * 10)) == 5.0

    def test_partial_sum(self):
        series = make_series([0.1, 0.2, 0.3, 0.4, 0.5])
        assert tube_actionness(self.tube(1, 3), series) == pytest.approx(0.9)

    def test_out_of_bounds(self):
        with pytest.raises(ValueError):
            tube_actionness(self.tube(3, 6), make_series([0.5] * 5))


class TestTemporalLocalize:
    def test_full_video(self):
        spans = temporal_localize(make_series([0.9] * 5), 0.5)
        assert spans == [TemporalSpan(0, 4)]

    def test_human_gate_blocks_everything(self):
        spans = temporal_localize(make_series([0.9] * 5, human=[False] * 5), 0.5)
        assert spans == []

    def test_threshold_scan(self):
        spans = temporal_localize(make_series([0.9, 0.9, 0.1, 0.9, 0.9]), 0.5)
        assert spans == [TemporalSpan(0, 1), TemporalSpan(3, 4)]

    def test_non_finite_threshold(self):
        with pytest.raises(ValueError):
            temporal_localize(make_series([0.5]), float("nan"))

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=0, max_size=40),
        st.floats(min_value=0, max_value=1),
    )
    def test_spans_cover_exactly_qualifying_frames(self, values, threshold):
        human = [i % 3 != 0 for i in range(len(values))]
        series = make_series(values, human)
        spans = temporal_localize(series, threshold)
        covered = set()
        for s in spans:
            assert not covered & set(s.frames())
            covered |= set(s.frames())
        expected = {t for t in range(len(values)) if human[t] and values[t] >= threshold}
        assert covered == expected


class TestComposeActionness:
    def test_composes_formula(self):
        series = compose_actionness([0.5], [1.0], [1.0], [True])
        assert series.values == (0.25,)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compose_actionness([0.5], [1.0], [1.0], [True, False])
