"""Command-line interface. Exit codes: 0 ok, 1 usage error, 2 data error."""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys

from . import analysis, description
from .errors import Scene2VirtError
from .ontology import load_ontology, validate_graph
from .pipeline import ArtifactStore, default_store_path, run_pipeline
from .scenegraph import (
    RemoveEntity,
    Relabel,
    SetAttribute,
    SetReverse,
    apply_edits,
    canonical_json,
    deserialize,
    serialize,
)
from .selector import Request, load_rules, select_plan
from .stages import CODECS, default_registry
from .synthesis import read_ppm, synthesize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(text, out):
    if out:
        parent = os.path.dirname(os.path.abspath(out))
        os.makedirs(parent, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _value(text):
    """Edit values: JSON when it parses (numbers, lists, booleans), else a string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_validate(args):
    if not (args.ontology or args.rules or args.graph):
        raise UsageError("validate: give at least one of --ontology, --rules, --graph")
    schema = load_ontology(_read(args.ontology)) if args.ontology else None
    if schema is not None:
        print(f"ontology ok: {len(schema.classes)} classes, {len(schema.relation_defs)} relations")
    if args.rules:
        rules = load_rules(_read(args.rules))
        print(f"rules ok: {len(rules)} rules")
    if args.graph:
        graph = deserialize(_read(args.graph))
        print(f"graph ok: {len(graph.entities)} entities, {len(graph.relations)} relations")
        if schema is not None:
            report = validate_graph(schema, graph)
            for v in report.violations:
                print(f"  {v.kind}: {v.subject}: {v.detail}")
            if not report.valid:
                return 2
    return 0


def cmd_analyze(args):
    dets = analysis.ingest_detections(_read(args.detections))
    tracks = analysis.associate_tracks(dets, args.iou_threshold, args.max_missed)
    if args.smooth_window != 1:
        tracks = analysis.smooth_tracks(tracks, args.smooth_window)
    posed = analysis.attach_poses(tracks, _read(args.poses)) if args.poses else [analysis.PosedTrack(t) for t in tracks]
    _emit(canonical_json(analysis.tracks_to_doc(posed)), args.out)
    return 0


def cmd_describe(args):
    posed = analysis.tracks_from_doc(json.loads(_read(args.tracks)))
    schema = load_ontology(_read(args.ontology))
    params = description.SpatialParams(args.near_factor, args.overlap_min_iou)
    doc = description.describe(posed, schema, params, args.source_id)
    _emit(doc, args.out)
    if args.out:
        base = os.path.dirname(os.path.abspath(args.out))
        for rel, rle in description.extract_masks(posed).items():
            _emit(canonical_json(rle), os.path.join(base, rel))
    return 0


def cmd_edit(args):
    graph = deserialize(_read(args.graph))
    edits = [SetAttribute(e, name, _value(v)) for e, name, v in args.set_attr or ()]
    edits += [Relabel(e, cls) for e, cls in args.relabel or ()]
    edits += [RemoveEntity(e) for e in args.remove or ()]
    if args.reverse is not None:
        edits.append(SetReverse(args.reverse))
    if not edits:
        raise UsageError("edit: no edit given")
    _emit(serialize(apply_edits(graph, edits)), args.out)
    return 0


def _load_masks(graph, graph_path):
    base = os.path.dirname(os.path.abspath(graph_path))
    masks = {}
    for fp in graph.frames:
        for p in fp.payloads:
            if p.kind == "mask_ref":
                path = os.path.join(base, p.data)
                if os.path.exists(path):
                    masks[p.data] = json.loads(_read(path))
    return masks


def cmd_synthesize(args):
    graph = deserialize(_read(args.graph))
    request = Request.loads(_read(args.request))
    background = read_ppm(args.background) if args.background else None
    plate = read_ppm(args.plate) if args.plate else None
    doc = synthesize(graph, request, args.out, background, plate, _load_masks(graph, args.graph))
    print(f"wrote {len(doc['frames'])} frames ({doc['mode']}) to {args.out}")
    return 0


def _inputs(pairs):
    out = {}
    for item in pairs or ():
        kind, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--inputs expects kind=path, got {item!r}")
        out[kind] = path
    return out


def cmd_run(args):
    registry = default_registry()
    rules = load_rules(_read(args.rules))
    request = Request.loads(_read(args.request))
    plan = select_plan(rules, request, registry)
    inputs = _inputs(args.inputs)
    inputs.update(ontology=args.ontology, request=args.request)
    store = ArtifactStore(args.store or default_store_path())
    report = run_pipeline(plan, inputs, store, registry, CODECS)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for kind in ("masks", "graph_document", "obj_set", "frame_set", "manifest"):
            if kind in report.outputs:
                shutil.copytree(report.outputs[kind], args.out, dirs_exist_ok=True)
    print(json.dumps(report.to_doc(), indent=1, sort_keys=True))
    return 0


def cmd_explain(args):
    rules = load_rules(_read(args.rules))
    request = Request.loads(_read(args.request))
    plan = select_plan(rules, request, default_registry())
    print(f"rules fired: {', '.join(plan.fired)}")
    for i, spec in enumerate(plan.stages, start=1):
        params = " ".join(f"{k}={v}" for k, v in sorted(spec.params.items()))
        print(f"{i:2d}. {spec.stage_id} {params}".rstrip())
    return 0


def build_parser():
    p = _Parser(prog="scene2virt", description=__doc__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("validate", help="check ontology / rules / scene-graph files")
    s.add_argument("--ontology")
    s.add_argument("--rules")
    s.add_argument("--graph")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("analyze", help="detections + poses -> tracks document")
    s.add_argument("--detections", required=True)
    s.add_argument("--poses")
    s.add_argument("--iou-threshold", type=float, default=0.3)
    s.add_argument("--max-missed", type=int, default=5)
    s.add_argument("--smooth-window", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("describe", help="tracks document -> refined scene graph")
    s.add_argument("--tracks", required=True)
    s.add_argument("--ontology", required=True)
    s.add_argument("--source-id", default="")
    s.add_argument("--near-factor", type=float, default=0.5)
    s.add_argument("--overlap-min-iou", type=float, default=0.05)
    s.add_argument("--out")
    s.set_defaults(func=cmd_describe)

    s = sub.add_parser("edit", help="apply edits to a scene graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--set-attr", nargs=3, action="append", metavar=("ENTITY", "NAME", "VALUE"))
    s.add_argument("--remove", action="append", metavar="ENTITY")
    s.add_argument("--relabel", nargs=2, action="append", metavar=("ENTITY", "CLASS"))
    s.add_argument("--reverse", type=_bool)
    s.add_argument("--out")
    s.set_defaults(func=cmd_edit)

    s = sub.add_parser("synthesize", help="scene graph -> OBJ sequence or rendered frames")
    s.add_argument("--graph", required=True)
    s.add_argument("--request", required=True)
    s.add_argument("--background")
    s.add_argument("--plate")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("run", help="full selector-driven pipeline with stage caching")
    s.add_argument("--rules", required=True)
    s.add_argument("--ontology", required=True)
    s.add_argument("--request", required=True)
    s.add_argument("--inputs", nargs="+", metavar="KIND=PATH")
    s.add_argument("--store")
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("explain", help="print the plan a request compiles to")
    s.add_argument("--rules", required=True)
    s.add_argument("--request", required=True)
    s.set_defaults(func=cmd_explain)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_usage().strip())
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (Scene2VirtError, OSError, ValueError) as exc:
        print(f"scene2virt: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
