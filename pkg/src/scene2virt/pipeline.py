"""Plan execution over a content-addressed artifact store.

An artifact is a set of named files. A stage's hash is the digest of its
id, canonical params and the hashes of the artifacts it consumes; each
output artifact's hash derives from that. A stage whose outputs are all
indexed is a cache hit and is never executed again.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .errors import Scene2VirtError, StageError, StoreCorruption

KINDS = frozenset(
    {
        # pipeline inputs
        "detection_file", "pose_file", "ontology", "request", "background", "plate",
        # stage artifacts
        "detections", "tracks", "posed_tracks", "scene_graph", "masks", "graph_document",
        "scene_plan", "obj_set", "backdrop", "frame_set", "manifest",
    }
)
PIPELINE_INPUTS = frozenset({"detection_file", "pose_file", "ontology", "request", "background", "plate"})

STORE_ENV = "SCENE2VIRT_STORE"


def default_store_path():
    return os.environ.get(STORE_ENV) or os.path.join(os.path.expanduser("~"), ".cache", "scene2virt")


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def sha256(data):
    return hashlib.sha256(data).hexdigest()


def files_digest(files):
    h = hashlib.sha256()
    for name in sorted(files):
        data = files[name]
        h.update(name.encode("utf-8") + b"\0" + str(len(data)).encode() + b"\0")
        h.update(data)
    return h.hexdigest()


@dataclass(frozen=True)
class StageInfo:
    inputs: tuple
    outputs: tuple
    executor: Callable
    optional_inputs: tuple = ()


@dataclass
class StageRegistry:
    entries: dict = field(default_factory=dict)
    pipeline_inputs: frozenset = PIPELINE_INPUTS

    def register(self, stage_id, inputs, outputs, executor, optional_inputs=()):
        if stage_id in self.entries:
            raise ValueError(f"stage {stage_id!r} already registered")
        for kind in (*inputs, *outputs, *optional_inputs):
            if kind not in KINDS:
                raise ValueError(f"stage {stage_id!r}: unknown artifact kind {kind!r}")
        self.entries[stage_id] = StageInfo(tuple(inputs), tuple(outputs), executor, tuple(optional_inputs))


def input_hash(kind, data):
    return sha256(_canonical(["input", kind, sha256(data)]).encode())


def stage_hash(stage_id, params, input_hashes):
    """Digest of (stage id, canonical params, input hashes sorted by kind)."""
    doc = {"stage": stage_id, "params": params, "inputs": sorted(input_hashes.items())}
    return sha256(_canonical(doc).encode())


def output_hash(stage_h, kind):
    return sha256(f"{stage_h}:{kind}".encode())


class ArtifactStore:
    """Directory-backed store: ``index/<hash>.json`` records, ``objects/<hash>/`` payloads."""

    def __init__(self, root):
        self.root = os.path.abspath(root)
        os.makedirs(os.path.join(self.root, "index"), exist_ok=True)
        os.makedirs(os.path.join(self.root, "objects"), exist_ok=True)
        self._lock = threading.Lock()

    def _record_path(self, h):
        return os.path.join(self.root, "index", h + ".json")

    def payload_path(self, h):
        return os.path.join(self.root, "objects", h)

    def has(self, h):
        return os.path.exists(self._record_path(h))

    def record(self, h):
        with open(self._record_path(h), encoding="utf-8") as fh:
            return json.load(fh)

    def put(self, h, kind, producer, input_hashes, files):
        if self.has(h):
            return self.payload_path(h)
        tmp = tempfile.mkdtemp(prefix=".tmp-", dir=os.path.join(self.root, "objects"))
        for name, data in files.items():
            path = os.path.join(tmp, name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(data)
        rec = {
            "kind": kind,
            "producer": producer,
            "inputs": dict(sorted(input_hashes.items())),
            "payload": os.path.join("objects", h),
            "digest": files_digest(files),
            "files": sorted(files),
        }
        with self._lock:
            if self.has(h):
                shutil.rmtree(tmp)
                return self.payload_path(h)
            final = self.payload_path(h)
            if os.path.exists(final):
                shutil.rmtree(final)
            os.replace(tmp, final)
            fd, tmp_rec = tempfile.mkstemp(prefix=".tmp-", dir=os.path.join(self.root, "index"))
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(_canonical(rec))
            os.replace(tmp_rec, self._record_path(h))
        return final

    def get(self, h):
        """Files of artifact ``h``; raises StoreCorruption if they no longer match."""
        rec = self.record(h)
        base = self.payload_path(h)
        files = {}
        for name in rec["files"]:
            try:
                with open(os.path.join(base, name), "rb") as fh:
                    files[name] = fh.read()
            except OSError:
                raise StoreCorruption(f"artifact {h[:12]} is missing file {name}") from None
        if files_digest(files) != rec["digest"]:
            raise StoreCorruption(f"artifact {h[:12]} ({rec['kind']}) failed its content check")
        return files


@dataclass
class RunReport:
    executed: list = field(default_factory=list)
    cache_hits: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    hashes: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)

    def to_doc(self):
        return {
            "executed": self.executed,
            "cache_hits": self.cache_hits,
            "outputs": self.outputs,
            "hashes": self.hashes,
            "wall_times_ms": self.wall_times,
        }


def run_pipeline(plan, inputs, store, registry, codecs):
    """Execute ``plan`` in order, reusing stored artifacts where possible.

    ``inputs`` maps pipeline-input kinds to file paths (or raw bytes).
    ``codecs`` maps each artifact kind to an ``(encode, decode)`` pair
    converting between python values and ``{name: bytes}`` file sets.
    """
    hashes = {}
    values = {}
    raw = {}
    for kind, src in inputs.items():
        if kind not in registry.pipeline_inputs:
            raise Scene2VirtError(f"{kind!r} is not a pipeline input kind")
        if isinstance(src, (bytes, bytearray)):
            data = bytes(src)
        else:
            with open(src, "rb") as fh:
                data = fh.read()
        raw[kind] = data
        hashes[kind] = input_hash(kind, data)

    def value(kind):
        if kind not in values:
            if kind in raw:
                values[kind] = codecs[kind][1]({"input": raw[kind]})
            else:
                values[kind] = codecs[kind][1](store.get(hashes[kind]))
        return values[kind]

    report = RunReport()
    for spec in plan.stages:
        info = registry.entries[spec.stage_id]
        missing = [k for k in info.inputs if k not in hashes]
        if missing:
            raise Scene2VirtError(f"stage {spec.stage_id!r} is missing input {missing[0]!r}")
        used = [k for k in (*info.inputs, *info.optional_inputs) if k in hashes]
        in_hashes = {k: hashes[k] for k in used}
        h = stage_hash(spec.stage_id, spec.params, in_hashes)
        out_hashes = {k: output_hash(h, k) for k in info.outputs}
        start = time.perf_counter()
        if all(store.has(oh) for oh in out_hashes.values()):
            for k, oh in out_hashes.items():
                store.get(oh)  # content check before reuse
                values.pop(k, None)
            report.cache_hits.append(spec.stage_id)
        else:
            try:
                produced = info.executor({k: value(k) for k in used}, dict(spec.params))
            except Scene2VirtError as exc:
                raise StageError(spec.stage_id, exc) from exc
            for k, oh in out_hashes.items():
                store.put(oh, k, spec.stage_id, in_hashes, codecs[k][0](produced[k]))
                values[k] = produced[k]
            report.executed.append(spec.stage_id)
        report.wall_times[spec.stage_id] = round((time.perf_counter() - start) * 1000.0, 3)
        hashes.update(out_hashes)
        for k, oh in out_hashes.items():
            report.outputs[k] = store.payload_path(oh)
            report.hashes[k] = oh
    return report
