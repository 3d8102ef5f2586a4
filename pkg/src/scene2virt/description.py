"""Scene description: posed tracks -> scene graph -> spatial relations -> refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .analysis import iou
from .errors import GraphError
from .ontology import infer
from .scenegraph import Entity, Meta, Payload, RelationInstance, SceneGraph, serialize


@dataclass(frozen=True)
class SpatialParams:
    near_factor: float = 0.5
    overlap_min_iou: float = 0.05

    def __post_init__(self):
        if not (self.near_factor > 0 and self.overlap_min_iou > 0):
            raise ValueError("spatial thresholds must be positive")


def entity_id(track):
    return f"{track.class_name}_{track.track_id}"


def mask_ref(eid, frame):
    return f"masks/{eid}_{frame:05d}.json"


def build_graph(tracks, schema, source_id=""):
    entities = []
    payloads = []
    last = -1
    for pt in tracks:
        t = pt.track
        if not schema.has_class(t.class_name):
            raise GraphError(f"class {t.class_name!r} is not declared in the ontology", t.class_name)
        eid = entity_id(t)
        entities.append(Entity(eid, t.class_name, {}))
        for frame, det in t.observations.items():
            last = max(last, frame)
            payloads.append((frame, Payload(eid, "bbox", list(det.bbox))))
            if det.mask is not None:
                payloads.append((frame, Payload(eid, "mask_ref", mask_ref(eid, frame))))
        for frame, pose in pt.poses.items():
            payloads.append((frame, Payload(eid, "pose", pose.to_doc())))
    meta = Meta(source_id=source_id, frame_count=last + 1)
    return SceneGraph.build(meta, entities, (), payloads)


def extract_masks(tracks):
    """Mask files keyed by the mask_ref paths that build_graph records."""
    out = {}
    for pt in tracks:
        eid = entity_id(pt.track)
        for frame, det in pt.track.observations.items():
            if det.mask is not None:
                out[mask_ref(eid, frame)] = det.mask
    return out


def spatial_predicates(a, b, params):
    """Predicates holding for the ordered pair of boxes (a, b)."""
    out = []
    if a[2] < b[0]:
        out.append("left_of")
    if a[3] < b[1]:
        out.append("above")
    overlapping = iou(a, b) >= params.overlap_min_iou
    if overlapping:
        out.append("overlapping")
    else:
        ca = ((a[0] + a[2]) / 2, (a[1] + a[3]) / 2)
        cb = ((b[0] + b[2]) / 2, (b[1] + b[3]) / 2)
        diag = (math.hypot(a[2] - a[0], a[3] - a[1]) + math.hypot(b[2] - b[0], b[3] - b[1])) / 2
        if math.dist(ca, cb) < params.near_factor * diag:
            out.append("near")
    return out


def infer_spatial_relations(graph, params=SpatialParams()):
    rels = list(graph.relations)
    for fp in graph.frames:
        boxes = [(p.entity, p.data) for p in fp.payloads if p.kind == "bbox"]
        for ea, a in boxes:
            for eb, b in boxes:
                if ea == eb:
                    continue
                for pred in spatial_predicates(a, b, params):
                    rels.append(RelationInstance(ea, pred, eb, fp.frame))
    return graph.with_relations(rels)


def refine(graph, schema):
    return infer(schema, graph)


def describe(tracks, schema, params=SpatialParams(), source_id=""):
    graph = build_graph(tracks, schema, source_id)
    graph = infer_spatial_relations(graph, params)
    return serialize(refine(graph, schema))
