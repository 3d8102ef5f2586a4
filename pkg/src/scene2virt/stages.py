"""Built-in stage registry: executors and artifact codecs for every kind."""
from __future__ import annotations

import json

from . import analysis, description
from .errors import ParseError
from .ontology import load_ontology
from .pipeline import StageRegistry
from .scenegraph import canonical_json, deserialize, serialize
from .selector import Request
from .synthesis import Image, composite, fill_background, parse_ppm, ppm_bytes, rasterize
from .synthesis.camera import camera_from_request
from .synthesis.scene import (
    ScenePlan,
    entity_masks,
    frame_meshes,
    frame_name,
    manifest,
    obj_files,
    plan_scene,
)


def _json_files(name):
    def encode(value):
        return {name: canonical_json(value).encode("utf-8")}

    def decode(files):
        return json.loads(files[name].decode("utf-8"))

    return encode, decode


def _raw(parse):
    return (lambda value: {"input": value}), (lambda files: parse(files["input"]))


def _tracks_codec(name):
    def encode(posed):
        return {name: canonical_json(analysis.tracks_to_doc(posed)).encode()}

    def decode(files):
        return analysis.tracks_from_doc(json.loads(files[name]))

    return encode, decode


def _plain_tracks(tracks):
    return [analysis.PosedTrack(t, {}) for t in tracks]


def _files():
    return (lambda files: dict(files)), (lambda files: dict(files))


def _ppm_set():
    def encode(images):
        return {name: ppm_bytes(img) for name, img in images.items()}

    def decode(files):
        return {name: parse_ppm(data) for name, data in files.items()}

    return encode, decode


def _masks_codec():
    def encode(masks):
        return {path: canonical_json(rle).encode() for path, rle in masks.items()}

    def decode(files):
        return {path: json.loads(data) for path, data in files.items()}

    return encode, decode


def _detections_codec():
    def encode(dets):
        return {"detections.json": canonical_json([d.to_doc() for d in dets]).encode()}

    def decode(files):
        return analysis.ingest_detections(files["detections.json"])

    return encode, decode


_tracks_enc, _tracks_dec = _tracks_codec("tracks.json")

CODECS = {
    "detection_file": _raw(lambda b: b),
    "pose_file": _raw(lambda b: b),
    "ontology": _raw(lambda b: load_ontology(b.decode("utf-8"))),
    "request": _raw(lambda b: Request.loads(b.decode("utf-8"))),
    "background": _raw(parse_ppm),
    "plate": _raw(parse_ppm),
    "detections": _detections_codec(),
    "tracks": (
        lambda tracks: _tracks_enc(_plain_tracks(tracks)),
        lambda files: [pt.track for pt in _tracks_dec(files)],
    ),
    "posed_tracks": _tracks_codec("posed_tracks.json"),
    "scene_graph": (
        lambda g: {"scene_graph.json": serialize(g).encode("utf-8")},
        lambda files: deserialize(files["scene_graph.json"]),
    ),
    "masks": _masks_codec(),
    "graph_document": (
        lambda text: {"scene_graph.json": text.encode("utf-8")},
        lambda files: files["scene_graph.json"].decode("utf-8"),
    ),
    "scene_plan": (
        lambda plan: {"scene_plan.json": canonical_json(plan.to_doc()).encode()},
        lambda files: ScenePlan.from_doc(json.loads(files["scene_plan.json"])),
    ),
    "obj_set": (
        lambda files: {k: v.encode("utf-8") for k, v in files.items()},
        lambda files: {k: v.decode("utf-8") for k, v in files.items()},
    ),
    "backdrop": _ppm_set(),
    "frame_set": _ppm_set(),
    "manifest": _json_files("manifest.json"),
}


def _param(params, name, default, kind=float):
    value = params.get(name, default)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ParseError(f"stage param {name}={value!r} is not a valid {kind.__name__}") from None


def run_ingest(inputs, params):
    return {"detections": analysis.ingest_detections(inputs["detection_file"])}


def run_track(inputs, params):
    tracks = analysis.associate_tracks(
        inputs["detections"],
        iou_threshold=_param(params, "iou_threshold", 0.3),
        max_missed=_param(params, "max_missed", 5, int),
        max_per_frame=_param(params, "max_per_frame", 64, int),
    )
    window = _param(params, "smooth_window", 1, int)
    if window != 1:
        tracks = analysis.smooth_tracks(tracks, window)
    return {"tracks": tracks}


def run_attach(inputs, params):
    return {"posed_tracks": analysis.attach_poses(inputs["tracks"], inputs["pose_file"])}


def run_build(inputs, params):
    sp = description.SpatialParams(
        _param(params, "near_factor", 0.5), _param(params, "overlap_min_iou", 0.05)
    )
    tracks = inputs["posed_tracks"]
    graph = description.build_graph(tracks, inputs["ontology"], str(params.get("source_id", "")))
    graph = description.infer_spatial_relations(graph, sp)
    return {"scene_graph": graph, "masks": description.extract_masks(tracks)}


def run_refine(inputs, params):
    return {"scene_graph": description.refine(inputs["scene_graph"], inputs["ontology"])}


def run_serialize(inputs, params):
    return {"graph_document": serialize(inputs["scene_graph"])}


def run_plan(inputs, params):
    request = inputs["request"]
    size = None
    if "background" in inputs:
        size = (inputs["background"].width, inputs["background"].height)
    camera = camera_from_request(request, image_size=size)
    return {"scene_plan": plan_scene(inputs["scene_graph"], request, camera)}


def run_export_obj(inputs, params):
    return {"obj_set": obj_files(inputs["scene_plan"], inputs["scene_graph"])}


def _static_background(inputs, plan):
    bg = inputs.get("background")
    return bg if bg is not None else Image.blank(plan.camera.width, plan.camera.height)


def run_background_fill(inputs, params):
    plan, graph = inputs["scene_plan"], inputs["scene_graph"]
    bg = _static_background(inputs, plan)
    out = {}
    for fp in plan.frames:
        masks = entity_masks(graph, fp.source_frame, inputs["masks"])
        filled, _, _ = fill_background(bg, masks, inputs.get("plate"))
        out[f"backdrop_{fp.source_frame:05d}.ppm"] = filled
    return {"backdrop": out}


def run_rasterize_composite(inputs, params):
    plan, graph = inputs["scene_plan"], inputs["scene_graph"]
    bg = _static_background(inputs, plan)
    backdrop = inputs.get("backdrop")
    frames = {}
    for k, src in enumerate(plan.output_order):
        render = rasterize(frame_meshes(plan, graph, src), plan.camera)
        if backdrop is not None:
            result = composite(render, backdrop[f"backdrop_{src:05d}.ppm"], (), "overlay")
        elif plan.mode == "replace":
            masks = entity_masks(graph, src, inputs.get("masks", {}))
            result = composite(render, bg, masks, "replace", inputs.get("plate"))
        else:
            result = composite(render, bg, (), "overlay")
        frames[frame_name(k, "ppm")] = result.image
    return {"frame_set": frames}


def run_write_manifest(inputs, params):
    plan, graph = inputs["scene_plan"], inputs["scene_graph"]
    objs = sorted(inputs["obj_set"]) if "obj_set" in inputs else None
    ppms = sorted(inputs["frame_set"]) if "frame_set" in inputs else None
    return {"manifest": manifest(plan, graph, obj_files=objs, ppm_files=ppms)}


def default_registry():
    reg = StageRegistry()
    reg.register("ingest_detections", ["detection_file"], ["detections"], run_ingest)
    reg.register("track", ["detections"], ["tracks"], run_track)
    reg.register("attach_poses", ["tracks", "pose_file"], ["posed_tracks"], run_attach)
    reg.register("build_graph", ["posed_tracks", "ontology"], ["scene_graph", "masks"], run_build)
    reg.register("refine_graph", ["scene_graph", "ontology"], ["scene_graph"], run_refine)
    reg.register("serialize_graph", ["scene_graph"], ["graph_document"], run_serialize)
    reg.register("plan_scene", ["scene_graph", "request"], ["scene_plan"], run_plan, ["background"])
    reg.register("export_obj", ["scene_plan", "scene_graph"], ["obj_set"], run_export_obj)
    reg.register(
        "background_fill", ["scene_plan", "scene_graph", "masks"], ["backdrop"], run_background_fill,
        ["background", "plate"],
    )
    reg.register(
        "rasterize_composite", ["scene_plan", "scene_graph"], ["frame_set"], run_rasterize_composite,
        ["background", "backdrop", "masks", "plate"],
    )
    reg.register(
        "write_manifest", ["scene_plan", "scene_graph"], ["manifest"], run_write_manifest, ["obj_set", "frame_set"]
    )
    return reg
