import math
import os
import random

import pytest

from scene2virt.analysis import Detection, PosedTrack, SkeletonPose, Track
from scene2virt.description import (
    SpatialParams,
    build_graph,
    describe,
    extract_masks,
    infer_spatial_relations,
    refine,
    spatial_predicates,
)
from scene2virt.errors import GraphError
from scene2virt.ontology import validate_graph
from scene2virt.scenegraph import Entity, Meta, Payload, SceneGraph, deserialize, serialize

from oracles import predicates

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "pair_graph.json")
P = SpatialParams()


def posed(track_id, cls, boxes, with_pose=True):
    obs = {f: Detection(f, b, cls, 0.9) for f, b in enumerate(boxes)}
    pose = SkeletonPose(tuple((0.0, 0.0, 0.0) for _ in range(17)), (0.0, 1.0, 0.0), 0.0)
    return PosedTrack(Track(track_id, cls, obs), {f: pose for f in obs} if with_pose else {})


def test_build_graph_one_track(schema):
    g = build_graph([posed(1, "person", [(0, 0, 10, 10)] * 3)], schema)
    assert [e.id for e in g.entities] == ["person_1"]
    assert g.meta.frame_count == 3 and g.relations == ()
    for f in range(3):
        assert g.payload(f, "person_1", "bbox") == [0, 0, 10, 10]
        assert g.payload(f, "person_1", "pose")["root"]["t"] == [0.0, 1.0, 0.0]


def test_build_graph_empty_and_unknown_class(schema):
    g = build_graph([], schema)
    assert g.entities == () and g.meta.frame_count == 0
    with pytest.raises(GraphError):
        build_graph([posed(1, "robot", [(0, 0, 1, 1)])], schema)


def test_spatial_example():
    a, b = (0, 0, 10, 10), (20, 0, 30, 10)
    assert spatial_predicates(a, b, P) == ["left_of"]
    assert spatial_predicates(b, a, P) == []
    # center distance 20 vs 0.5 * sqrt(200)
    assert 20 >= 0.5 * math.sqrt(200)


def test_spatial_identical_boxes():
    assert spatial_predicates((0, 0, 10, 10), (0, 0, 10, 10), P) == ["overlapping"]


def test_spatial_near():
    assert spatial_predicates((0, 0, 10, 10), (11, 0, 21, 10), SpatialParams(near_factor=1.0)) == ["left_of", "near"]


def test_single_entity_no_relations(schema):
    g = infer_spatial_relations(build_graph([posed(1, "person", [(0, 0, 10, 10)])], schema))
    assert g.relations == ()


def test_params_must_be_positive():
    with pytest.raises(ValueError):
        SpatialParams(near_factor=0)


def random_boxes(rng, n):
    out = []
    for _ in range(n):
        x, y = rng.uniform(0, 100), rng.uniform(0, 100)
        out.append((x, y, x + rng.uniform(1, 40), y + rng.uniform(1, 40)))
    return out


def test_geometric_soundness_brute_force(schema):
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(1, 5)
        boxes = random_boxes(rng, n)
        g = SceneGraph.build(
            Meta(frame_count=1),
            [Entity(f"person_{i}", "person") for i in range(n)],
            payloads=[(0, Payload(f"person_{i}", "bbox", list(b))) for i, b in enumerate(boxes)],
        )
        got = {(r.subject, r.predicate, r.object) for r in infer_spatial_relations(g).relations}
        want = {
            (f"person_{i}", p, f"person_{j}")
            for i in range(n)
            for j in range(n)
            if i != j
            for p in predicates(boxes[i], boxes[j])
        }
        assert got == want
        for s, p, o in got:
            if p in ("left_of", "above"):
                assert (o, p, s) not in got and s != o


def test_refine_adds_inverses_and_is_idempotent(schema, pair_tracks):
    g = infer_spatial_relations(build_graph(pair_tracks, schema))
    r = refine(g, schema)
    for rel in r.relations:
        if rel.predicate == "left_of":
            assert any(x.predicate == "right_of" and x.subject == rel.object and x.frame == rel.frame for x in r.relations)
    assert serialize(refine(r, schema)) == serialize(r)


def test_describe_pair_fixture(schema, pair_tracks):
    doc = describe(pair_tracks, schema, source_id="pair")
    assert doc == describe(pair_tracks, schema, source_id="pair")
    g = deserialize(doc)
    assert validate_graph(schema, g).valid
    assert serialize(refine(g, schema)) == doc
    assert [e.id for e in g.entities] == ["person_1", "person_2"]
    with open(GOLDEN, encoding="utf-8") as fh:
        assert doc == fh.read()


def test_describe_empty(schema):
    assert describe([], schema) == serialize(SceneGraph.build())


def test_extract_masks_keys_match_refs(schema, pair_tracks):
    g = build_graph(pair_tracks, schema)
    refs = {p.data for fp in g.frames for p in fp.payloads if p.kind == "mask_ref"}
    assert set(extract_masks(pair_tracks)) == refs and len(refs) == 60
