import math
import random

import pytest

from scene2virt import analysis, fixtures
from scene2virt.ontology import load_ontology
from scene2virt.scenegraph import Entity, Meta, Payload, RelationInstance, SceneGraph
from scene2virt.selector import load_rules
from scene2virt.stages import default_registry


def read_data(name, mode="r"):
    with open(fixtures.data_path(name), mode) as fh:
        return fh.read()


@pytest.fixture(scope="session")
def schema():
    return load_ontology(read_data("poc_ontology.json"))


@pytest.fixture(scope="session")
def rules():
    return load_rules(read_data("poc_rules.json"))


@pytest.fixture(scope="session")
def registry():
    return default_registry()


def posed_fixture(name):
    dets = analysis.ingest_detections(read_data(f"{name}_detections.json"))
    tracks = analysis.associate_tracks(dets)
    return analysis.attach_poses(tracks, read_data(f"{name}_poses.json"))


@pytest.fixture(scope="session")
def swing_tracks():
    return posed_fixture("swing")


@pytest.fixture(scope="session")
def pair_tracks():
    return posed_fixture("pair")


def _rand_float(rng):
    choice = rng.random()
    if choice < 0.1:
        return rng.choice([0.0, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, -2.5])
    if choice < 0.2:
        return float(rng.randint(-5, 5))
    return rng.uniform(-1e3, 1e3)


def _rand_attr(rng):
    kind = rng.randrange(5)
    if kind == 0:
        return _rand_float(rng)
    if kind == 1:
        return rng.randint(-10**6, 10**6)
    if kind == 2:
        return rng.random() < 0.5
    if kind == 3:
        return rng.choice(["red", "ä ö ☃", "", "quote\"back\\slash", "tab\tnew\nline"])
    return [_rand_float(rng) for _ in range(3)]


def random_graph(rng, max_entities=10, max_frames=20, classes=("person", "ball", "golf_club")):
    """Random structurally valid scene graph."""
    frame_count = rng.randint(0, max_frames)
    n = rng.randint(0, max_entities)
    entities = []
    for i in range(n):
        cls = rng.choice(classes)
        attrs = {rng.choice(["color", "rotation_yaw", "label", "w", "x_y"]): _rand_attr(rng) for _ in range(rng.randint(0, 3))}
        entities.append(Entity(f"{cls}_{i + 1}", cls, attrs))
    rng.shuffle(entities)
    ids = [e.id for e in entities]
    relations = []
    if ids:
        for _ in range(rng.randint(0, 15)):
            frame = rng.randrange(frame_count) if frame_count and rng.random() < 0.7 else None
            relations.append(RelationInstance(rng.choice(ids), rng.choice(["left_of", "near", "holds"]), rng.choice(ids), frame))
    payloads = []
    for f in range(frame_count):
        for eid in ids:
            if rng.random() < 0.5:
                x, y = rng.uniform(0, 300), rng.uniform(0, 200)
                payloads.append((f, Payload(eid, "bbox", [x, y, x + rng.uniform(1, 20), y + rng.uniform(1, 20)])))
            if rng.random() < 0.2:
                payloads.append((f, Payload(eid, "pose", {
                    "root": {"t": [_rand_float(rng) for _ in range(3)], "yaw": rng.uniform(-math.pi, math.pi)},
                    "joints": [[rng.uniform(-1, 1) for _ in range(3)] for _ in range(17)],
                })))
            if rng.random() < 0.1:
                payloads.append((f, Payload(eid, "mask_ref", f"masks/{eid}_{f:05d}.json")))
    meta = Meta(source_id=rng.choice(["", "clip-1", "vidéo"]), frame_count=frame_count, reverse=rng.random() < 0.3)
    return SceneGraph.build(meta, entities, relations, payloads, [f"log {k}" for k in range(rng.randint(0, 2))])


@pytest.fixture
def rng():
    return random.Random(1234)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
