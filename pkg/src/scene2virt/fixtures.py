"""Synthetic proof-of-concept fixtures.

Two scripted scenes stand in for real footage: ``swing`` (one person, 40
frames, golf-swing-like arm motion) and ``pair`` (two people walking toward
each other, 30 frames). Detections are derived by projecting the scripted
skeletons through the default camera, so overlays line up with the boxes.

``python -m scene2virt.fixtures DIR`` regenerates the shipped data files.
"""
from __future__ import annotations

import json
import math
import os
import sys

import numpy as np

from .scenegraph import canonical_json
from .synthesis.avatar import rotate_yaw
from .synthesis.camera import Camera, project
from .synthesis.composite import box_mask_rle
from .synthesis.raster import Image, ppm_bytes

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
PELVIS_HEIGHT = 0.95

ONTOLOGY = {
    "version": "1",
    "classes": [
        {"name": "object"},
        {"name": "person", "parent": "object"},
        {"name": "equipment", "parent": "object"},
        {"name": "golf_club", "parent": "equipment"},
        {"name": "ball", "parent": "equipment"},
    ],
    "attributes": [
        {"name": "rotation_yaw", "value_type": "number", "applies_to": ["object"]},
        {"name": "color", "value_type": "vector3", "applies_to": ["object"]},
        {"name": "label", "value_type": "string", "applies_to": ["object"]},
        {"name": "activity", "value_type": "enum", "applies_to": ["person"], "values": ["golf", "running", "walking"]},
    ],
    "relations": [
        {"name": "left_of", "domain": ["object"], "range": ["object"], "transitive": True, "inverse_of": "right_of"},
        {"name": "right_of", "domain": ["object"], "range": ["object"], "transitive": True, "inverse_of": "left_of"},
        {"name": "above", "domain": ["object"], "range": ["object"], "transitive": True, "inverse_of": "below"},
        {"name": "below", "domain": ["object"], "range": ["object"], "transitive": True, "inverse_of": "above"},
        {"name": "overlapping", "domain": ["object"], "range": ["object"], "inverse_of": "overlapping"},
        {"name": "near", "domain": ["object"], "range": ["object"], "inverse_of": "near"},
        {"name": "holds", "domain": ["person"], "range": ["equipment"], "inverse_of": "held_by"},
        {"name": "held_by", "domain": ["equipment"], "range": ["person"], "inverse_of": "holds"},
    ],
}

_BASE = [("ingest_detections", {}), ("track", {"iou_threshold": 0.3, "max_missed": 5}), ("attach_poses", {}),
         ("build_graph", {"source_id": "poc"}), ("refine_graph", {}), ("serialize_graph", {})]


def _then(stages):
    return [{"stage": s, "params": p} if p else {"stage": s} for s, p in stages]


RULES = {
    "version": "1",
    "rules": [
        {"id": "analysis_base", "priority": 100, "when": [], "then": _then(_BASE)},
        {
            "id": "high_detail_tracking",
            "priority": 150,
            "when": [{"field": "detail", "op": "eq", "value": "high"}],
            "then": _then([("ingest_detections", {}),
                           ("track", {"iou_threshold": 0.5, "max_missed": 5, "smooth_window": 3})]),
        },
        {
            "id": "swap_with_inpainting",
            "priority": 60,
            "when": [{"field": "output_kind", "op": "eq", "value": "replace_frames"}],
            "then": _then([("plan_scene", {}), ("background_fill", {}), ("rasterize_composite", {}),
                           ("write_manifest", {})]),
        },
        {
            "id": "overlay_avatars",
            "priority": 50,
            "when": [{"field": "output_kind", "op": "eq", "value": "overlay_frames"}],
            "then": _then([("plan_scene", {}), ("rasterize_composite", {}), ("write_manifest", {})]),
        },
        {
            "id": "obj_export",
            "priority": 50,
            "when": [{"field": "output_kind", "op": "eq", "value": "obj_sequence"}],
            "then": _then([("plan_scene", {}), ("export_obj", {}), ("write_manifest", {})]),
        },
    ],
}


def standing_joints(arm_angle=0.0, stride=0.0):
    """17 COCO joints, pelvis-centered, meters. ``arm_angle`` swings both
    hands together in the body plane; ``stride`` swings the legs."""
    j = np.zeros((17, 3))
    j[0] = (0.0, 0.62, 0.08)
    j[1] = (-0.03, 0.66, 0.07)
    j[2] = (0.03, 0.66, 0.07)
    j[3] = (-0.07, 0.64, 0.0)
    j[4] = (0.07, 0.64, 0.0)
    j[5] = (-0.18, 0.45, 0.0)
    j[6] = (0.18, 0.45, 0.0)
    grip = np.array([0.55 * math.sin(arm_angle), 0.45 - 0.55 * math.cos(arm_angle), 0.2])
    j[9] = grip + (-0.03, 0.0, 0.0)
    j[10] = grip + (0.03, 0.0, 0.0)
    j[7] = (j[5] + j[9]) / 2 + (0.0, 0.0, 0.08)
    j[8] = (j[6] + j[10]) / 2 + (0.0, 0.0, 0.08)
    j[11] = (-0.1, 0.0, 0.0)
    j[12] = (0.1, 0.0, 0.0)
    for hip, knee, ankle, sign in ((11, 13, 15, 1.0), (12, 14, 16, -1.0)):
        swing = sign * stride
        j[knee] = j[hip] + (0.0, -0.45 * math.cos(swing), 0.45 * math.sin(swing) + 0.02)
        j[ankle] = j[knee] + (0.0, -0.43 * math.cos(swing * 0.5), 0.43 * math.sin(swing * 0.5))
    return j


def _bbox(joints, root_t, yaw, camera, margin=4.0):
    world = rotate_yaw(joints, yaw) + np.asarray(root_t)
    u, v, _ = project(world, camera)
    x0, x1 = max(u.min() - margin, 0.0), min(u.max() + margin, camera.width - 1.0)
    y0, y1 = max(v.min() - margin, 0.0), min(v.max() + margin, camera.height - 1.0)
    return [round(float(x0), 3), round(float(y0), 3), round(float(x1), 3), round(float(y1), 3)]


def _round(a):
    return [round(float(x), 6) for x in a]


def scripted_scene(people, n_frames, camera=None):
    """``people``: list of callables frame -> (joints, root_t, yaw). Returns
    (detection records, pose records); track ids follow left-to-right order
    of first appearance, which is how the tracker numbers them."""
    camera = camera or Camera()
    dets, poses = [], []
    for f in range(n_frames):
        for tid, person in enumerate(people, start=1):
            joints, root_t, yaw = person(f)
            box = _bbox(joints, root_t, yaw, camera)
            dets.append(
                {
                    "frame": f,
                    "bbox": box,
                    "class": "person",
                    "score": 0.9,
                    "mask": box_mask_rle(box, camera.width, camera.height),
                }
            )
            poses.append(
                {
                    "track_id": tid,
                    "frame": f,
                    "root": {"t": _round(root_t), "yaw": round(float(yaw), 6)},
                    "joints": [_round(p) for p in joints],
                }
            )
    return dets, poses


def swing_scene(n_frames=40):
    def golfer(f):
        phase = f / (n_frames - 1)
        angle = math.radians(-110.0 + 230.0 * phase)
        return standing_joints(arm_angle=angle), (0.0, PELVIS_HEIGHT, 0.0), 0.25

    return scripted_scene([golfer], n_frames)


def pair_scene(n_frames=30):
    def walker(x0, x1, yaw):
        def at(f):
            phase = f / (n_frames - 1)
            x = x0 + (x1 - x0) * phase
            stride = 0.35 * math.sin(2 * math.pi * 2 * phase)
            return standing_joints(arm_angle=0.15 * stride, stride=stride), (x, PELVIS_HEIGHT, 0.0), yaw

        return at

    return scripted_scene([walker(-2.2, -0.8, math.pi / 2), walker(2.2, 0.9, -math.pi / 2)], n_frames)


def plate_image(width=320, height=240):
    """Clean plate: sky/ground gradient without actors."""
    y = np.arange(height)[:, None]
    x = np.arange(width)[None, :]
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[..., 0] = (90 + 60 * y // height + 0 * x).astype(np.uint8)
    px[..., 1] = (140 + 40 * x // width + 0 * y).astype(np.uint8)
    px[..., 2] = np.where(y < height * 0.6, 220, 70).astype(np.uint8) + 0 * x
    return Image(width, height, px, np.zeros((height, width), dtype=bool))


def background_image(width=320, height=240):
    """Source frame stand-in: the plate with a checker texture painted over it."""
    img = plate_image(width, height)
    y = np.arange(height)[:, None]
    x = np.arange(width)[None, :]
    checker = ((x // 10 + y // 10) % 2 == 0)
    px = img.pixels.copy()
    px[checker] = px[checker] // 2 + 30
    return Image(width, height, px, np.zeros((height, width), dtype=bool))


REQUESTS = {
    kind: {"scene_type": "human-activity", "output_kind": kind, "detail": "low", "extra": {}}
    for kind in ("graph_only", "obj_sequence", "overlay_frames", "replace_frames")
}


def write_data(out_dir=DATA_DIR):
    os.makedirs(out_dir, exist_ok=True)

    def dump(name, obj):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, indent=1, sort_keys=True) + "\n")

    dump("poc_ontology.json", ONTOLOGY)
    dump("poc_rules.json", RULES)
    for kind, req in REQUESTS.items():
        dump(f"request_{kind}.json", req)
    for name, scene in (("swing", swing_scene()), ("pair", pair_scene())):
        dets, poses = scene
        with open(os.path.join(out_dir, f"{name}_detections.json"), "w", encoding="utf-8") as fh:
            fh.write(canonical_json(dets))
        with open(os.path.join(out_dir, f"{name}_poses.json"), "w", encoding="utf-8") as fh:
            fh.write(canonical_json(poses))
    for name, img in (("background.ppm", background_image()), ("plate.ppm", plate_image())):
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(ppm_bytes(img))


def data_path(name):
    return os.path.join(DATA_DIR, name)


if __name__ == "__main__":
    write_data(sys.argv[1] if len(sys.argv) > 1 else DATA_DIR)
