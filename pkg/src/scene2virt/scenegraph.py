"""Spatio-temporal scene graph: the interchange artifact of the pipeline.

Graphs are immutable values. Every constructor path goes through
:meth:`SceneGraph.build`, which normalizes ordering and checks structural
invariants, so two graphs describing the same scene compare equal and
serialize to the same bytes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional, Union

from .errors import GraphError, ParseError

FORMAT_VERSION = "1.0"
PAYLOAD_KINDS = ("bbox", "pose", "mask_ref")
HAS = "+has"


@dataclass(frozen=True)
class Meta:
    source_id: str = ""
    frame_count: int = 0
    reverse: bool = False
    version: str = FORMAT_VERSION


@dataclass(frozen=True)
class Entity:
    id: str
    class_name: str
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RelationInstance:
    subject: str
    predicate: str
    object: str
    frame: Optional[int] = None

    def sort_key(self):
        present = self.frame is not None
        return (present, self.frame if present else -1, self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class Payload:
    entity: str
    kind: str
    data: Any


@dataclass(frozen=True)
class FramePayloads:
    frame: int
    payloads: tuple = ()


@dataclass(frozen=True)
class SceneGraph:
    meta: Meta = field(default_factory=Meta)
    entities: tuple = ()
    relations: tuple = ()
    frames: tuple = ()
    provenance: tuple = ()

    @classmethod
    def build(cls, meta=None, entities=(), relations=(), payloads=(), provenance=()):
        """Normalize and validate.

        ``payloads`` is an iterable of ``(frame, Payload)`` pairs or of
        :class:`FramePayloads`.
        """
        meta = meta or Meta()
        ents = tuple(sorted((_norm_entity(e) for e in entities), key=lambda e: e.id))
        rels = tuple(sorted(set(relations), key=RelationInstance.sort_key))
        flat = []
        for item in payloads:
            if isinstance(item, FramePayloads):
                flat.extend((item.frame, p) for p in item.payloads)
            else:
                frame, p = item
                flat.append((frame, p))
        by_frame = {}
        for frame, p in flat:
            by_frame.setdefault(frame, []).append(Payload(p.entity, p.kind, _plain(p.data)))
        frames = tuple(
            FramePayloads(f, tuple(sorted(ps, key=lambda p: (p.entity, p.kind))))
            for f, ps in sorted(by_frame.items())
        )
        graph = cls(meta, ents, rels, frames, tuple(provenance))
        graph.check()
        return graph

    def check(self):
        fc = self.meta.frame_count
        if not isinstance(fc, int) or isinstance(fc, bool) or fc < 0:
            raise GraphError(f"frame_count must be a non-negative integer, got {fc!r}")
        ids = set()
        for e in self.entities:
            if e.id in ids:
                raise GraphError(f"duplicate id {e.id!r}", e.id)
            ids.add(e.id)
            if not e.class_name or not e.id.startswith(e.class_name + "_") or len(e.id) == len(e.class_name) + 1:
                raise GraphError(f"entity id {e.id!r} does not match class {e.class_name!r}", e.id)
            for name, value in e.attributes.items():
                if not _is_attr_value(value):
                    raise GraphError(f"attribute {e.id}.{name} must be scalar or vector3", e.id)
        for r in self.relations:
            if not r.predicate:
                raise GraphError("empty predicate")
            for end in (r.subject, r.object):
                if end not in ids:
                    raise GraphError(f"relation endpoint {end!r} is not an entity", end)
            if r.frame is not None and not 0 <= r.frame < fc:
                raise GraphError(f"relation frame {r.frame} out of range 0..{fc - 1}", r.subject)
        for fp in self.frames:
            if not 0 <= fp.frame < fc:
                raise GraphError(f"payload frame {fp.frame} out of range 0..{fc - 1}")
            seen = set()
            for p in fp.payloads:
                if p.entity not in ids:
                    raise GraphError(f"payload entity {p.entity!r} is not an entity", p.entity)
                if p.kind not in PAYLOAD_KINDS:
                    raise GraphError(f"unknown payload kind {p.kind!r}", p.entity)
                if (p.entity, p.kind) in seen:
                    raise GraphError(f"duplicate {p.kind} payload for {p.entity} in frame {fp.frame}", p.entity)
                seen.add((p.entity, p.kind))

    def entity(self, entity_id):
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise GraphError(f"unknown entity {entity_id!r}", entity_id)

    def has_entity(self, entity_id):
        return any(e.id == entity_id for e in self.entities)

    def payload(self, frame, entity_id, kind):
        for fp in self.frames:
            if fp.frame == frame:
                for p in fp.payloads:
                    if p.entity == entity_id and p.kind == kind:
                        return p.data
        return None

    def payloads_by_frame(self):
        return {fp.frame: fp.payloads for fp in self.frames}

    def with_relations(self, relations, provenance=()):
        return SceneGraph.build(
            self.meta, self.entities, relations, self.frames, self.provenance + tuple(provenance)
        )


def _norm_entity(e):
    return Entity(e.id, e.class_name, {k: _plain(v) for k, v in e.attributes.items()})


def _plain(value):
    """Convert tuples/numpy scalars to JSON-native python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    if hasattr(value, "item"):
        return value.item()
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    return value


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_attr_value(v):
    if isinstance(v, (str, bool)) or _is_number(v):
        return True
    return isinstance(v, list) and len(v) == 3 and all(_is_number(x) for x in v)


# --------------------------------------------------------------------------
# serialization


def to_document(graph):
    return {
        "version": graph.meta.version,
        "meta": {
            "source_id": graph.meta.source_id,
            "frame_count": graph.meta.frame_count,
            "reverse": graph.meta.reverse,
        },
        "entities": [
            {"id": e.id, "class": e.class_name, "attributes": e.attributes} for e in graph.entities
        ],
        "relations": [_relation_doc(r) for r in graph.relations],
        "has": [
            {
                "frame": fp.frame,
                "payloads": [{"entity": p.entity, "kind": p.kind, "data": p.data} for p in fp.payloads],
            }
            for fp in graph.frames
        ],
        "provenance": list(graph.provenance),
    }


def _relation_doc(r):
    doc = {"subject": r.subject, "predicate": r.predicate, "object": r.object}
    if r.frame is not None:
        doc["frame"] = r.frame
    return doc


def canonical_json(obj):
    """Sorted keys, no whitespace, shortest round-trip floats, one trailing newline."""
    try:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    except ValueError as exc:
        raise GraphError(f"cannot serialize non-finite number: {exc}") from None
    return text + "\n"


def serialize(graph):
    return canonical_json(to_document(graph))


def graph_hash(graph):
    return hashlib.sha256(serialize(graph).encode("utf-8")).hexdigest()


def deserialize(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scene graph is not valid JSON: {exc}") from None
    return from_document(doc)


def from_document(doc):
    if not isinstance(doc, dict):
        raise ParseError("scene graph root must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported scene graph version {version!r}")
    try:
        m = doc.get("meta", {})
        meta = Meta(
            source_id=m.get("source_id", ""),
            frame_count=m.get("frame_count", 0),
            reverse=bool(m.get("reverse", False)),
            version=version,
        )
        entities = [Entity(e["id"], e["class"], dict(e.get("attributes", {}))) for e in doc.get("entities", [])]
        relations = [
            RelationInstance(r["subject"], r["predicate"], r["object"], r.get("frame"))
            for r in doc.get("relations", [])
        ]
        payloads = []
        for block in doc.get("has", []):
            for p in block.get("payloads", []):
                payloads.append((block["frame"], Payload(p["entity"], p["kind"], p["data"])))
        provenance = [str(s) for s in doc.get("provenance", [])]
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed scene graph document: {exc!r}") from None
    seen = set()
    for e in entities:
        if e.id in seen:
            raise GraphError(f"duplicate id {e.id!r}", e.id)
        seen.add(e.id)
    return SceneGraph.build(meta, entities, relations, payloads, provenance)


# --------------------------------------------------------------------------
# edits


@dataclass(frozen=True)
class SetAttribute:
    entity: str
    name: str
    value: Any


@dataclass(frozen=True)
class RemoveEntity:
    entity: str


@dataclass(frozen=True)
class SetReverse:
    reverse: bool


@dataclass(frozen=True)
class Relabel:
    entity: str
    class_name: str


Edit = Union[SetAttribute, RemoveEntity, SetReverse, Relabel]


def apply_edit(graph, edit):
    if isinstance(edit, SetReverse):
        meta = replace(graph.meta, reverse=bool(edit.reverse))
        log = f"edit: set_reverse {str(bool(edit.reverse)).lower()}"
        return SceneGraph.build(meta, graph.entities, graph.relations, graph.frames, graph.provenance + (log,))

    target = graph.entity(edit.entity)
    if isinstance(edit, SetAttribute):
        value = _plain(edit.value)
        if not _is_attr_value(value):
            raise GraphError(f"attribute {edit.name} must be scalar or vector3", edit.entity)
        attrs = dict(target.attributes)
        attrs[edit.name] = value
        entities = [Entity(e.id, e.class_name, attrs) if e.id == target.id else e for e in graph.entities]
        log = f"edit: set_attribute {target.id}.{edit.name}={json.dumps(value, allow_nan=False)}"
        return SceneGraph.build(graph.meta, entities, graph.relations, graph.frames, graph.provenance + (log,))

    if isinstance(edit, RemoveEntity):
        gone = target.id
        entities = [e for e in graph.entities if e.id != gone]
        relations = [r for r in graph.relations if gone not in (r.subject, r.object)]
        payloads = [
            (fp.frame, p) for fp in graph.frames for p in fp.payloads if p.entity != gone
        ]
        log = f"edit: remove_entity {gone}"
        return SceneGraph.build(graph.meta, entities, relations, payloads, graph.provenance + (log,))

    if isinstance(edit, Relabel):
        if not edit.class_name:
            raise GraphError("relabel needs a class name", edit.entity)
        ordinal = target.id[len(target.class_name) + 1:]
        new_id = f"{edit.class_name}_{ordinal}"
        if new_id != target.id and graph.has_entity(new_id):
            raise GraphError(f"relabel collides with existing id {new_id!r}", new_id)

        def ren(x):
            return new_id if x == target.id else x

        entities = [
            Entity(new_id, edit.class_name, e.attributes) if e.id == target.id else e for e in graph.entities
        ]
        relations = [RelationInstance(ren(r.subject), r.predicate, ren(r.object), r.frame) for r in graph.relations]
        payloads = [
            (fp.frame, Payload(ren(p.entity), p.kind, p.data)) for fp in graph.frames for p in fp.payloads
        ]
        log = f"edit: relabel {target.id} -> {new_id}"
        return SceneGraph.build(graph.meta, entities, relations, payloads, graph.provenance + (log,))

    raise TypeError(f"not an edit: {edit!r}")


def apply_edits(graph, edits: Iterable):
    for edit in edits:
        graph = apply_edit(graph, edit)
    return graph


def query(graph, subject=None, predicate=None, object=None, frame=None):
    """Relations matching every bound field, in canonical order."""
    out = []
    for r in graph.relations:
        if subject is not None and r.subject != subject:
            continue
        if predicate is not None and r.predicate != predicate:
            continue
        if object is not None and r.object != object:
            continue
        if frame is not None and r.frame != frame:
            continue
        out.append(r)
    return out

