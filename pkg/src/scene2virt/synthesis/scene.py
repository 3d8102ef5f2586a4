"""Scene planning and output writers (OBJ sequences, PPM frames, manifest)."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from ..analysis import pose_from_doc
from ..errors import SynthesisError
from ..scenegraph import canonical_json, graph_hash
from .avatar import DEFAULT_COLOR, build_avatar
from .camera import Camera, camera_from_request
from .composite import composite
from .raster import Image, ppm_bytes, rasterize

log = logging.getLogger(__name__)

MODES = {"overlay_frames": "overlay", "replace_frames": "replace", "obj_sequence": "obj_only"}
MANIFEST_VERSION = "1.0"


@dataclass(frozen=True)
class Placement:
    entity_id: str
    pose: object  # SkeletonPose
    yaw_total: float


@dataclass(frozen=True)
class FramePlacement:
    source_frame: int
    placements: tuple = ()


@dataclass(frozen=True)
class ScenePlan:
    frames: tuple
    mode: str
    camera: Camera
    output_order: tuple
    warnings: tuple = ()

    def placement_for(self, source_frame):
        return self.frames[source_frame]

    def to_doc(self):
        return {
            "mode": self.mode,
            "camera": self.camera.to_doc(),
            "output_order": list(self.output_order),
            "warnings": list(self.warnings),
            "frames": [
                {
                    "source_frame": fp.source_frame,
                    "placements": [
                        {"entity": p.entity_id, "yaw_total": p.yaw_total, "pose": p.pose.to_doc()}
                        for p in fp.placements
                    ],
                }
                for fp in self.frames
            ],
        }

    @classmethod
    def from_doc(cls, doc):
        frames = tuple(
            FramePlacement(
                f["source_frame"],
                tuple(Placement(p["entity"], pose_from_doc(p["pose"]), p["yaw_total"]) for p in f["placements"]),
            )
            for f in doc["frames"]
        )
        return cls(
            frames, doc["mode"], Camera.from_doc(doc["camera"]), tuple(doc["output_order"]), tuple(doc["warnings"])
        )


def plan_scene(graph, request, camera=None):
    mode = MODES.get(request.output_kind)
    if mode is None:
        raise SynthesisError(f"output_kind {request.output_kind!r} does not synthesize anything")
    camera = camera or camera_from_request(request)
    notes = []
    frames = []
    by_frame = graph.payloads_by_frame()
    extra_yaw = {}
    for e in graph.entities:
        yaw = e.attributes.get("rotation_yaw", 0.0)
        if isinstance(yaw, bool) or not isinstance(yaw, (int, float)):
            raise SynthesisError(f"{e.id}.rotation_yaw must be a number")
        extra_yaw[e.id] = float(yaw)
    for frame in range(graph.meta.frame_count):
        payloads = by_frame.get(frame, ())
        posed = {p.entity: p.data for p in payloads if p.kind == "pose"}
        boxed = {p.entity for p in payloads if p.kind == "bbox"}
        placements = []
        for eid in sorted(posed):
            pose = pose_from_doc(posed[eid])
            placements.append(Placement(eid, pose, pose.yaw + extra_yaw[eid]))
        for eid in sorted(boxed - set(posed)):
            notes.append(f"frame {frame}: {eid} has a box but no pose; skipped")
        frames.append(FramePlacement(frame, tuple(placements)))
    order = list(range(graph.meta.frame_count))
    if graph.meta.reverse:
        order.reverse()
    for n in notes:
        log.warning(n)
    return ScenePlan(tuple(frames), mode, camera, tuple(order), tuple(notes))


def entity_color(graph, entity_id):
    color = graph.entity(entity_id).attributes.get("color")
    if isinstance(color, list) and len(color) == 3:
        return tuple(int(max(0, min(255, round(c)))) for c in color)
    return DEFAULT_COLOR


def frame_meshes(plan, graph, source_frame, radius=0.05, sides=8):
    return [
        build_avatar(p.pose, p.yaw_total, radius, sides, p.entity_id, entity_color(graph, p.entity_id))
        for p in plan.frames[source_frame].placements
    ]


def _num(x):
    return repr(float(x))


def obj_text(meshes, header=""):
    lines = [f"# {header}"] if header else []
    offset = 1
    for m in meshes:
        lines.append(f"o {m.entity_id}")
        lines.extend(f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in m.vertices.tolist())
        lines.extend(f"f {a + offset} {b + offset} {c + offset}" for a, b, c in m.triangles.tolist())
        offset += len(m.vertices)
    return "\n".join(lines) + "\n"


def frame_name(index, ext):
    return f"frame_{index:05d}.{ext}"


def manifest(plan, graph, obj_files=None, ppm_files=None):
    frames = []
    for k, src in enumerate(plan.output_order):
        entry = {"index": k, "source_frame": src}
        if obj_files is not None:
            entry["obj"] = obj_files[k]
        if ppm_files is not None:
            entry["ppm"] = ppm_files[k]
        frames.append(entry)
    return {
        "version": MANIFEST_VERSION,
        "mode": plan.mode,
        "camera": plan.camera.to_doc(),
        "frames": frames,
        "graph_hash": graph_hash(graph),
    }


def _ensure_dir(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise SynthesisError(f"cannot create output directory {out_dir}: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise SynthesisError(f"output directory {out_dir} is not writable")


def obj_files(plan, graph):
    """OBJ documents keyed by file name, in output order."""
    out = {}
    for k, src in enumerate(plan.output_order):
        out[frame_name(k, "obj")] = obj_text(frame_meshes(plan, graph, src), f"output frame {k}, source frame {src}")
    return out


def export_obj(plan, graph, out_dir):
    _ensure_dir(out_dir)
    files = obj_files(plan, graph)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return manifest(plan, graph, obj_files=list(files))


def entity_masks(graph, source_frame, masks):
    """RLE masks of every entity in a source frame, via its mask_ref payload."""
    out = []
    for fp in graph.frames:
        if fp.frame != source_frame:
            continue
        for p in fp.payloads:
            if p.kind == "mask_ref":
                rle = masks.get(p.data)
                if rle is None:
                    log.warning("mask %s referenced by %s is missing", p.data, p.entity)
                else:
                    out.append(rle)
    return out


def render_frames(plan, graph, background=None, plate=None, masks=None, backend=None):
    """Composited images in output order.

    ``background`` is one static image or a list indexed by source frame.
    """
    if plan.mode == "obj_only":
        raise SynthesisError("plan mode obj_only renders no frames")
    w, h = plan.camera.width, plan.camera.height
    results = []
    for src in plan.output_order:
        if isinstance(background, (list, tuple)):
            bg = background[src]
        else:
            bg = background if background is not None else Image.blank(w, h)
        render = rasterize(frame_meshes(plan, graph, src), plan.camera, backend=backend)
        frame_masks = entity_masks(graph, src, masks or {}) if plan.mode == "replace" else ()
        results.append(composite(render, bg, frame_masks, plan.mode, plate))
    return results


def write_frames(images, out_dir):
    _ensure_dir(out_dir)
    frames = []
    for k, img in enumerate(images):
        name = frame_name(k, "ppm")
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(ppm_bytes(img))
        frames.append({"index": k, "ppm": name})
    return {"version": MANIFEST_VERSION, "frames": frames}


def write_manifest(doc, out_dir):
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
    return path


def synthesize(graph, request, out_dir, background=None, plate=None, masks=None, camera=None):
    """Plan, build and write the requested output; returns the manifest."""
    if camera is None and background is not None and not isinstance(background, (list, tuple)):
        camera = camera_from_request(request, image_size=(background.width, background.height))
    plan = plan_scene(graph, request, camera)
    _ensure_dir(out_dir)
    if plan.mode == "obj_only":
        doc = export_obj(plan, graph, out_dir)
    else:
        results = render_frames(plan, graph, background, plate, masks)
        written = write_frames([r.image for r in results], out_dir)
        doc = manifest(plan, graph, ppm_files=[f["ppm"] for f in written["frames"]])
        for entry, r in zip(doc["frames"], results):
            if plan.mode == "replace":
                entry["residual_mask_area"] = r.residual_mask_area
    write_manifest(doc, out_dir)
    return doc


def geometry(plan, graph, output_index):
    """Concatenated world vertices of an output frame (for equality checks)."""
    meshes = frame_meshes(plan, graph, plan.output_order[output_index])
    if not meshes:
        return np.zeros((0, 3))
    return np.vstack([m.vertices for m in meshes])

