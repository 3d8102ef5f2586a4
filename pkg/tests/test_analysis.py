import json
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scene2virt.analysis import (
    Detection,
    PoseWarning,
    Track,
    associate_tracks,
    attach_poses,
    ingest_detections,
    iou,
    normalize_yaw,
    smooth_tracks,
    tracks_from_doc,
    tracks_to_doc,
)
from scene2virt.errors import AnalysisError, ParseError

from oracles import brute_track, cell_iou, random_frames


def det(frame, box, cls="person"):
    return Detection(frame, tuple(float(v) for v in box), cls, 0.9)


def test_ingest_frame_major_order():
    records = [
        {"frame": 1, "bbox": [50, 0, 60, 10], "class": "person", "score": 0.9},
        {"frame": 0, "bbox": [50, 0, 60, 10], "class": "person", "score": 0.9},
        {"frame": 1, "bbox": [0, 0, 10, 10], "class": "person", "score": 0.9},
        {"frame": 0, "bbox": [0, 0, 10, 10], "class": "person", "score": 0.9},
    ]
    dets = ingest_detections(json.dumps(records))
    assert [(d.frame, d.bbox[0]) for d in dets] == [(0, 0), (0, 50), (1, 0), (1, 50)]


def test_ingest_degenerate_box():
    with pytest.raises(AnalysisError, match="record 0.*degenerate"):
        ingest_detections('[{"frame": 0, "bbox": [10, 0, 10, 5], "class": "person", "score": 1}]')


def test_ingest_empty_and_bad():
    assert ingest_detections("[]") == []
    with pytest.raises(ParseError):
        ingest_detections("[{")


def test_iou_examples():
    assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert iou((0, 0, 10, 10), (20, 20, 30, 30)) == 0.0
    assert iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(cell_iou((0, 0, 10, 10), (5, 0, 15, 10)), abs=1e-12)
    assert cell_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=8, max_size=8))
def test_iou_matches_cell_counting(v):
    a = (min(v[0], v[1]), min(v[2], v[3]), max(v[0], v[1]) + 1, max(v[2], v[3]) + 1)
    b = (min(v[4], v[5]), min(v[6], v[7]), max(v[4], v[5]) + 1, max(v[6], v[7]) + 1)
    assert iou(a, b) == pytest.approx(cell_iou(a, b), abs=1e-12)
    assert iou(a, b) == iou(b, a)
    assert iou(a, a) == 1.0


def test_two_by_two_association():
    frames = {
        0: [det(0, (0, 0, 10, 10)), det(0, (20, 0, 30, 10))],
        1: [det(1, (1, 0, 11, 10)), det(1, (21, 0, 31, 10))],
    }
    tracks = associate_tracks(frames)
    assert [sorted(t.observations) for t in tracks] == [[0, 1], [0, 1]]
    assert tracks[0].observations[1].bbox[0] == 1.0
    assert tracks[1].observations[1].bbox[0] == 21.0


def test_single_track_ten_frames():
    tracks = associate_tracks([det(f, (f, 0, f + 10, 10)) for f in range(10)])
    assert len(tracks) == 1 and len(tracks[0].frames) == 10


def test_gap_longer_than_max_missed_splits():
    dets = [det(0, (0, 0, 10, 10)), det(7, (0, 0, 10, 10))]
    assert [t.track_id for t in associate_tracks(dets, max_missed=5)] == [1, 2]
    # a gap of exactly max_missed frames keeps the track alive
    dets = [det(0, (0, 0, 10, 10)), det(6, (0, 0, 10, 10))]
    assert len(associate_tracks(dets, max_missed=5)) == 1


def test_class_must_match():
    tracks = associate_tracks([det(0, (0, 0, 10, 10)), det(1, (0, 0, 10, 10), "ball")])
    assert [t.class_name for t in tracks] == ["person", "ball"]


def test_below_threshold_not_matched():
    tracks = associate_tracks([det(0, (0, 0, 10, 10)), det(1, (8, 0, 18, 10))], iou_threshold=0.3)
    assert len(tracks) == 2


def test_per_frame_cap():
    with pytest.raises(AnalysisError, match="cap"):
        associate_tracks([det(0, (i * 20, 0, i * 20 + 10, 10)) for i in range(5)], max_per_frame=4)


def test_empty_frames_are_legal():
    assert associate_tracks([]) == []
    assert associate_tracks({0: [], 1: []}) == []


def package_pairs(tracks, frames):
    """Per-frame (track_id, detection index) pairs the tracker chose."""
    out = {f: set() for f in frames}
    for t in tracks:
        first = t.frames[0]
        for f, d in t.observations.items():
            if f != first:
                j = next(k for k, x in enumerate(frames[f]) if x is d)
                out[f].add((t.track_id, j))
    return out


def compare_with_oracle(frames, iou_threshold=0.3, max_missed=5):
    """Number of frames where the tracker's assignment is not an exhaustive optimum."""
    tracks = associate_tracks(frames, iou_threshold, max_missed)
    ref_tracks, log = brute_track(frames, iou_threshold, max_missed)
    mine = package_pairs(tracks, frames)
    bad = 0
    for f, ids, winners, _ in log:
        options = [{(ids[i], j) for i, j in w} for w in winners]
        if mine.get(f, set()) not in options:
            bad += 1
    same = {t.track_id: {f: d.bbox for f, d in t.observations.items()} for t in tracks} == ref_tracks
    return bad, len(log), same


def test_tracker_matches_exhaustive_oracle():
    rng = random.Random(99)
    bad = total = 0
    for _ in range(6):
        frames = random_frames(rng, 25)
        b, n, same = compare_with_oracle(frames)
        bad += b
        total += n
        assert same
    assert total == 150 and bad == 0


def test_tracker_oracle_two_classes():
    rng = random.Random(5)
    frames = random_frames(rng, 40, max_objects=6, classes=("person", "ball"))
    bad, _, same = compare_with_oracle(frames, iou_threshold=0.1, max_missed=2)
    assert bad == 0 and same


def test_ids_dense_and_deterministic():
    rng = random.Random(3)
    frames = random_frames(rng, 50)
    a = associate_tracks(frames)
    b = associate_tracks(frames)
    assert [t.track_id for t in a] == list(range(1, len(a) + 1))
    assert [(t.track_id, t.observations) for t in a] == [(t.track_id, t.observations) for t in b]
    seen = [id(d) for t in a for d in t.observations.values()]
    every = [id(d) for ds in frames.values() for d in ds]
    assert sorted(seen) == sorted(every)


def track_of(xs):
    return Track(1, "person", {f: det(f, (x, 0, x + 10, 10)) for f, x in enumerate(xs)})


def test_smooth_identity_and_median():
    t = track_of([0, 100, 0])
    assert smooth_tracks([t], 1)[0].observations == t.observations
    out = smooth_tracks([t], 3)[0]
    assert out.observations[1].bbox[0] == 0
    assert [out.observations[f].bbox[0] for f in (0, 2)] == [0, 0]


def test_smooth_constant_and_errors():
    t = track_of([5] * 6)
    assert smooth_tracks([t], 5)[0].observations == t.observations
    with pytest.raises(AnalysisError):
        smooth_tracks([t], 2)


def test_smooth_preserves_frames():
    rng = random.Random(0)
    t = track_of([rng.uniform(0, 100) for _ in range(11)])
    out = smooth_tracks([t], 5)[0]
    assert out.frames == t.frames
    xs = [t.observations[f].bbox[0] for f in t.frames]
    assert out.observations[5].bbox[0] == float(np.median(xs[3:8]))


def pose_rec(tid, frame, n=17):
    return {"track_id": tid, "frame": frame, "root": {"t": [0, 1, 0], "yaw": 0.5}, "joints": [[0, 0, 0]] * n}


def test_attach_poses_join_and_warning():
    tracks = associate_tracks([det(0, (0, 0, 10, 10))])
    posed = attach_poses(tracks, json.dumps([pose_rec(1, 0)]))
    assert len(posed[0].poses) == 1 and posed[0].poses[0].yaw == 0.5
    with pytest.warns(PoseWarning):
        posed = attach_poses(tracks, json.dumps([pose_rec(9, 0)]))
    assert posed[0].poses == {}


def test_attach_poses_joint_count():
    tracks = associate_tracks([det(0, (0, 0, 10, 10))])
    with pytest.raises(AnalysisError, match="joint count"):
        attach_poses(tracks, json.dumps([pose_rec(1, 0, n=16)]))


def test_normalize_yaw():
    assert normalize_yaw(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert -np.pi <= normalize_yaw(np.pi) < np.pi


def test_tracks_document_round_trip(swing_tracks):
    doc = tracks_to_doc(swing_tracks)
    back = tracks_from_doc(json.loads(json.dumps(doc)))
    assert tracks_to_doc(back) == doc


def test_fixture_tracks(swing_tracks, pair_tracks):
    assert len(swing_tracks) == 1 and len(swing_tracks[0].poses) == 40
    assert [len(p.track.frames) for p in pair_tracks] == [30, 30]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        from conftest import posed_fixture
        posed_fixture("pair")
