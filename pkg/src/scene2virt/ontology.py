"""Knowledge base: class hierarchy, attribute and relation vocabulary, reasoner."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .errors import InferenceError, ParseError, SchemaError
from .scenegraph import HAS, RelationInstance

log = logging.getLogger(__name__)

VALUE_TYPES = ("string", "number", "boolean", "vector3", "enum")
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class ClassDef:
    name: str
    parent: Optional[str] = None


@dataclass(frozen=True)
class AttributeDef:
    name: str
    value_type: str
    applies_to: tuple
    values: tuple = ()


@dataclass(frozen=True)
class RelationDef:
    name: str
    domain: tuple
    range: tuple
    transitive: bool = False
    inverse_of: Optional[str] = None


@dataclass(frozen=True)
class OntologySchema:
    classes: tuple
    attribute_defs: tuple
    relation_defs: tuple
    version: str = "1"
    _ancestors: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        errors = _schema_problems(self)
        if errors:
            msg, ident = errors[0]
            raise SchemaError(msg, ident)
        parents = {c.name: c.parent for c in self.classes}
        ancestors = {}
        for name in parents:
            chain, cur = [], name
            while cur is not None:
                chain.append(cur)
                cur = parents[cur]
            ancestors[name] = frozenset(chain)
        object.__setattr__(self, "_ancestors", ancestors)

    @property
    def class_names(self):
        return [c.name for c in self.classes]

    def relation(self, name):
        for r in self.relation_defs:
            if r.name == name:
                return r
        return None

    def attribute(self, name):
        for a in self.attribute_defs:
            if a.name == name:
                return a
        return None

    def has_class(self, name):
        return name in self._ancestors


def _schema_problems(schema):
    problems = []
    names = set()
    for c in schema.classes:
        if not c.name:
            problems.append(("class name must be nonempty", c.name))
        if c.name in names:
            problems.append((f"duplicate class {c.name!r}", c.name))
        names.add(c.name)
    parents = {c.name: c.parent for c in schema.classes}
    for c in schema.classes:
        if c.parent == c.name:
            problems.append((f"cycle: class {c.name!r} is its own parent", c.name))
        elif c.parent is not None and c.parent not in names:
            problems.append((f"unknown class {c.parent!r} (parent of {c.name!r})", c.parent))
    if not problems:
        for c in schema.classes:
            seen, cur = set(), c.name
            while cur is not None:
                if cur in seen:
                    problems.append((f"cycle through class {c.name!r}", c.name))
                    break
                seen.add(cur)
                cur = parents[cur]

    for a in schema.attribute_defs:
        if a.value_type not in VALUE_TYPES:
            problems.append((f"attribute {a.name!r} has unknown value_type {a.value_type!r}", a.name))
        if not a.applies_to:
            problems.append((f"attribute {a.name!r} applies_to is empty", a.name))
        if a.value_type == "enum" and not a.values:
            problems.append((f"enum attribute {a.name!r} has no values", a.name))
        for cls in a.applies_to:
            if cls not in names:
                problems.append((f"unknown class {cls!r} in attribute {a.name!r}", cls))
    if len({a.name for a in schema.attribute_defs}) != len(schema.attribute_defs):
        problems.append(("duplicate attribute name", None))

    rels = {}
    for r in schema.relation_defs:
        if r.name in rels:
            problems.append((f"duplicate relation {r.name!r}", r.name))
        rels[r.name] = r
    for r in schema.relation_defs:
        if not r.domain or not r.range:
            problems.append((f"relation {r.name!r} needs nonempty domain and range", r.name))
        for cls in (*r.domain, *r.range):
            if cls not in names:
                problems.append((f"unknown class {cls!r} in relation {r.name!r}", cls))
        if r.inverse_of is not None:
            other = rels.get(r.inverse_of)
            if other is None:
                problems.append((f"unknown relation {r.inverse_of!r} (inverse of {r.name!r})", r.inverse_of))
            elif other.inverse_of != r.name:
                problems.append((f"asymmetric inverse: {r.name!r} -> {other.name!r}", r.name))
    return problems


def load_ontology(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"ontology is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("ontology root must be an object")
    try:
        classes = tuple(ClassDef(c["name"], c.get("parent")) for c in doc.get("classes", []))
        attrs = tuple(
            AttributeDef(
                a["name"], a["value_type"], tuple(a.get("applies_to", ())), tuple(a.get("values", ()))
            )
            for a in doc.get("attributes", [])
        )
        rels = tuple(
            RelationDef(
                r["name"],
                tuple(r.get("domain", ())),
                tuple(r.get("range", ())),
                bool(r.get("transitive", False)),
                r.get("inverse_of"),
            )
            for r in doc.get("relations", [])
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed ontology document: {exc!r}") from None
    return OntologySchema(classes, attrs, rels, str(doc.get("version", "1")))


def is_subclass(schema, sub, sup):
    for name in (sub, sup):
        if not schema.has_class(name):
            raise SchemaError(f"unknown class {name!r}", name)
    return sup in schema._ancestors[sub]


def _fits(schema, cls, allowed):
    return schema.has_class(cls) and any(schema.has_class(a) and is_subclass(schema, cls, a) for a in allowed)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def valid(self):
        return not self.violations

    def of_kind(self, *kinds):
        return [v for v in self.violations if v.kind in kinds]


UNKNOWN_KINDS = ("unknown-class", "unknown-relation", "unknown-attribute")


def _value_ok(adef, value):
    t = adef.value_type
    if t == "string":
        return isinstance(value, str)
    if t == "boolean":
        return isinstance(value, bool)
    if t == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if t == "vector3":
        return (
            isinstance(value, (list, tuple))
            and len(value) == 3
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        )
    return value in adef.values


def _relation_violation(schema, classes, rdef, subject, obj):
    if not _fits(schema, classes[subject], rdef.domain):
        return "domain-violation", f"{subject} ({classes[subject]}) not in domain {list(rdef.domain)} of {rdef.name}"
    if not _fits(schema, classes[obj], rdef.range):
        return "range-violation", f"{obj} ({classes[obj]}) not in range {list(rdef.range)} of {rdef.name}"
    return None


def validate_graph(schema, graph):
    out = []
    classes = {e.id: e.class_name for e in graph.entities}
    for e in graph.entities:
        known = schema.has_class(e.class_name)
        if not known:
            out.append(Violation("unknown-class", e.id, f"class {e.class_name!r} is not declared"))
        for name in sorted(e.attributes):
            adef = schema.attribute(name)
            if adef is None:
                out.append(Violation("unknown-attribute", e.id, f"attribute {name!r} is not declared"))
                continue
            if known and not _fits(schema, e.class_name, adef.applies_to):
                out.append(
                    Violation("unknown-attribute", e.id, f"attribute {name!r} does not apply to {e.class_name!r}")
                )
            if not _value_ok(adef, e.attributes[name]):
                out.append(
                    Violation(
                        "attribute-type-mismatch",
                        e.id,
                        f"attribute {name!r} expects {adef.value_type}, got {e.attributes[name]!r}",
                    )
                )
    for r in graph.relations:
        if r.predicate == HAS:
            continue
        rdef = schema.relation(r.predicate)
        if rdef is None:
            out.append(Violation("unknown-relation", r.subject, f"relation {r.predicate!r} is not declared"))
            continue
        if not (schema.has_class(classes[r.subject]) and schema.has_class(classes[r.object])):
            continue
        bad = _relation_violation(schema, classes, rdef, r.subject, r.object)
        if bad:
            out.append(Violation(bad[0], r.subject, bad[1]))
    return ValidationReport(tuple(out))


# --------------------------------------------------------------------------
# reasoner


def _close(schema, classes, facts):
    """One round of inverse completion and transitive composition.

    Derived facts that would break domain/range are not added; they are
    only possible under a schema whose inverse pairs disagree on classes.
    """
    new = set(facts)
    for pred, s, o in facts:
        rdef = schema.relation(pred)
        if rdef.inverse_of is not None:
            inv = schema.relation(rdef.inverse_of)
            if _relation_violation(schema, classes, inv, o, s) is None:
                new.add((inv.name, o, s))
            else:
                log.debug("suppressed inverse %s(%s,%s)", inv.name, o, s)
    succ = {}
    for pred, s, o in facts:
        succ.setdefault((pred, s), set()).add(o)
    for pred, s, o in facts:
        if schema.relation(pred).transitive:
            for o2 in succ.get((pred, o), ()):
                new.add((pred, s, o2))
    return new


def _fixpoint(schema, classes, facts, frame, removals):
    for _ in range(MAX_ITERATIONS):
        kept = set()
        for fact in facts:
            pred, s, o = fact
            bad = _relation_violation(schema, classes, schema.relation(pred), s, o)
            if bad:
                where = "all frames" if frame is None else f"frame {frame}"
                removals.append(f"infer: removed {pred}({s},{o}) at {where}: {bad[0]}")
            else:
                kept.add(fact)
        closed = _close(schema, classes, kept)
        if closed == facts:
            return closed
        facts = closed
    raise InferenceError(f"reasoner did not reach a fixpoint within {MAX_ITERATIONS} iterations")


def infer(schema, graph):
    report = validate_graph(schema, graph)
    unknown = report.of_kind(*UNKNOWN_KINDS)
    if unknown:
        v = unknown[0]
        raise InferenceError(f"cannot reason over unknown names: {v.subject}: {v.detail}")
    classes = {e.id: e.class_name for e in graph.entities}

    passthrough = [r for r in graph.relations if r.predicate == HAS]
    static = set()
    framed = {}
    for r in graph.relations:
        if r.predicate == HAS:
            continue
        fact = (r.predicate, r.subject, r.object)
        if r.frame is None:
            static.add(fact)
        else:
            framed.setdefault(r.frame, set()).add(fact)

    removals = []
    static_closed = _fixpoint(schema, classes, static, None, removals)
    out = [RelationInstance(s, p, o) for p, s, o in static_closed]
    for frame in sorted(framed):
        closed = _fixpoint(schema, classes, framed[frame] | static_closed, frame, removals)
        out.extend(RelationInstance(s, p, o, frame) for p, s, o in closed - static_closed)
    out.extend(passthrough)

    before = set(graph.relations)
    added = len(set(out) - before)
    provenance = list(removals)
    if added:
        provenance.append(f"infer: added {added} relations")
    return graph.with_relations(out, provenance)
