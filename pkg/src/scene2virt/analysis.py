"""Scene analysis stages: detection ingest, IoU tracking, pose attachment."""
from __future__ import annotations

import json
import math
import statistics
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import AnalysisError, ParseError

NUM_JOINTS = 17
COCO_JOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)


class PoseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: tuple
    class_name: str
    score: float = 1.0
    mask: Optional[dict] = None

    def to_doc(self):
        doc = {"frame": self.frame, "bbox": list(self.bbox), "class": self.class_name, "score": self.score}
        if self.mask is not None:
            doc["mask"] = self.mask
        return doc


@dataclass
class Track:
    track_id: int
    class_name: str
    observations: dict = field(default_factory=dict)

    @property
    def frames(self):
        return sorted(self.observations)

    def last(self):
        return self.observations[max(self.observations)]


@dataclass(frozen=True)
class SkeletonPose:
    joints: tuple
    root_t: tuple
    yaw: float

    def to_doc(self):
        return {"root": {"t": list(self.root_t), "yaw": self.yaw}, "joints": [list(j) for j in self.joints]}


@dataclass
class PosedTrack:
    track: Track
    poses: dict = field(default_factory=dict)


def normalize_yaw(yaw):
    y = math.fmod(yaw + math.pi, 2 * math.pi)
    if y < 0:
        y += 2 * math.pi
    y -= math.pi
    return -math.pi if y >= math.pi else y


def _load_json_array(text, what):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not text.strip():
        return []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} file is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise ParseError(f"{what} file root must be an array")
    return doc


def _finite(values):
    return all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values)


def parse_detection(rec, index):
    try:
        frame = rec["frame"]
        bbox = tuple(rec["bbox"])
        cls = rec["class"]
        score = rec.get("score", 1.0)
        mask = rec.get("mask")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"detection record {index}: missing field {exc}") from None
    if not isinstance(frame, int) or frame < 0:
        raise AnalysisError(f"detection record {index}: frame must be a non-negative integer")
    if len(bbox) != 4 or not _finite(bbox):
        raise AnalysisError(f"detection record {index}: bbox needs 4 finite numbers")
    if not (bbox[0] < bbox[2] and bbox[1] < bbox[3]):
        raise AnalysisError(f"detection record {index}: degenerate box {list(bbox)}")
    if not 0.0 <= score <= 1.0:
        raise AnalysisError(f"detection record {index}: score {score} outside [0, 1]")
    if mask is not None:
        try:
            h, w = mask["size"]
            counts = mask["counts"]
        except (KeyError, TypeError, ValueError):
            raise AnalysisError(f"detection record {index}: mask needs size [h, w] and counts") from None
        if any(c < 0 for c in counts) or sum(counts) != h * w:
            raise AnalysisError(f"detection record {index}: mask run-lengths do not cover {h}x{w} image")
        mask = {"size": [h, w], "counts": list(counts)}
    return Detection(frame, bbox, cls, score, mask)


def _det_key(d):
    return (d.frame, d.bbox[0], d.bbox[1])


def ingest_detections(text):
    """Parse a detection document; result sorted by (frame, x_min, y_min)."""
    records = _load_json_array(text, "detection")
    dets = [parse_detection(rec, i) for i, rec in enumerate(records)]
    return sorted(dets, key=_det_key)


def group_by_frame(detections):
    frames = {}
    for d in sorted(detections, key=_det_key):
        frames.setdefault(d.frame, []).append(d)
    return frames


def iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def gated_weights(tracks, detections, iou_threshold):
    """Association weight: IoU for same-class pairs at or above threshold, else 0."""
    w = np.zeros((len(tracks), len(detections)))
    for i, t in enumerate(tracks):
        box = t.last().bbox
        for j, d in enumerate(detections):
            if d.class_name == t.class_name:
                v = iou(box, d.bbox)
                if v >= iou_threshold:
                    w[i, j] = v
    return w


def assign(weights):
    """Maximum-total-weight one-to-one matching; zero-weight pairs are dropped."""
    if weights.size == 0:
        return []
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if weights[r, c] > 0]


def associate_tracks(detections, iou_threshold=0.3, max_missed=5, max_per_frame=64):
    if isinstance(detections, dict):
        frames = {f: list(ds) for f, ds in detections.items()}
    else:
        frames = group_by_frame(detections)
    live = []
    missed = {}
    finished = []
    next_id = 1
    if not frames:
        return []
    for frame in range(min(frames), max(frames) + 1):
        dets = sorted(frames.get(frame, []), key=_det_key)
        if len(dets) > max_per_frame:
            raise AnalysisError(f"frame {frame} has {len(dets)} detections (cap {max_per_frame})")
        matches = assign(gated_weights(live, dets, iou_threshold))
        matched_tracks = set()
        matched_dets = set()
        for i, j in matches:
            live[i].observations[frame] = dets[j]
            missed[live[i].track_id] = 0
            matched_tracks.add(i)
            matched_dets.add(j)
        still = []
        for i, t in enumerate(live):
            if i not in matched_tracks:
                missed[t.track_id] += 1
                if missed[t.track_id] > max_missed:
                    finished.append(t)
                    continue
            still.append(t)
        for j, d in enumerate(dets):
            if j not in matched_dets:
                t = Track(next_id, d.class_name, {frame: d})
                missed[next_id] = 0
                next_id += 1
                still.append(t)
        live = still
    return sorted(finished + live, key=lambda t: t.track_id)


def smooth_tracks(tracks, window):
    """Centered moving median of each bbox coordinate along a track.

    Near the ends the window shrinks symmetrically so it stays centered.
    """
    if window < 1 or window % 2 == 0:
        raise AnalysisError(f"smoothing window must be odd and >= 1, got {window}")
    half = window // 2
    out = []
    for t in tracks:
        frames = t.frames
        boxes = [t.observations[f].bbox for f in frames]
        obs = {}
        n = len(frames)
        for k, f in enumerate(frames):
            r = min(half, k, n - 1 - k)
            span = boxes[k - r:k + r + 1]
            box = tuple(statistics.median(b[c] for b in span) for c in range(4))
            d = t.observations[f]
            obs[f] = Detection(d.frame, box, d.class_name, d.score, d.mask)
        out.append(Track(t.track_id, t.class_name, obs))
    return out


def parse_pose(rec, index):
    try:
        joints = rec["joints"]
        root = rec["root"]
        t = tuple(root["t"])
        yaw = root.get("yaw", 0.0)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"pose record {index}: missing field {exc}") from None
    if len(joints) != NUM_JOINTS:
        raise AnalysisError(f"pose record {index}: joint count {len(joints)} != {NUM_JOINTS}")
    joints = tuple(tuple(j) for j in joints)
    if any(len(j) != 3 or not _finite(j) for j in joints) or len(t) != 3 or not _finite(t + (yaw,)):
        raise AnalysisError(f"pose record {index}: coordinates must be finite 3-vectors")
    return SkeletonPose(joints, t, normalize_yaw(yaw))


def pose_from_doc(doc):
    return parse_pose(doc, 0)


def attach_poses(tracks, text):
    """Join pose records onto tracks by (track_id, frame).

    Records naming an unknown pair are dropped with a :class:`PoseWarning`.
    """
    records = _load_json_array(text, "pose")
    by_id = {t.track_id: PosedTrack(t, {}) for t in tracks}
    for i, rec in enumerate(records):
        pose = parse_pose(rec, i)
        try:
            tid, frame = rec["track_id"], rec["frame"]
        except KeyError as exc:
            raise ParseError(f"pose record {i}: missing field {exc}") from None
        pt = by_id.get(tid)
        if pt is None or frame not in pt.track.observations:
            warnings.warn(f"pose record {i}: no observation for track {tid} at frame {frame}", PoseWarning)
            continue
        pt.poses[frame] = pose
    return [by_id[t.track_id] for t in tracks]


# --------------------------------------------------------------------------
# tracks document (output of `analyze`)


def tracks_to_doc(posed):
    out = []
    for pt in posed:
        t = pt.track
        out.append(
            {
                "track_id": t.track_id,
                "class": t.class_name,
                "observations": [t.observations[f].to_doc() for f in t.frames],
                "poses": [dict(frame=f, **pt.poses[f].to_doc()) for f in sorted(pt.poses)],
            }
        )
    return {"version": "1.0", "tracks": out}


def tracks_from_doc(doc):
    try:
        posed = []
        for rec in doc["tracks"]:
            obs = {}
            for i, d in enumerate(rec["observations"]):
                det = parse_detection(d, i)
                obs[det.frame] = det
            poses = {p["frame"]: parse_pose(p, i) for i, p in enumerate(rec.get("poses", []))}
            posed.append(PosedTrack(Track(rec["track_id"], rec["class"], obs), poses))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed tracks document: {exc!r}") from None
    return posed
