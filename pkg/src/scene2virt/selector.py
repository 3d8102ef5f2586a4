"""Rule-based algorithm selector.

A rule set is compiled against a request into a :class:`PipelinePlan`:
matching rules are ordered by (priority desc, file index asc), their stage
lists concatenated, and the first occurrence of every stage id kept.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ParseError, SelectionError

OUTPUT_KINDS = ("graph_only", "obj_sequence", "overlay_frames", "replace_frames")
DETAIL_LEVELS = ("low", "high")
OPERATORS = ("eq", "ne", "in")


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True)
class Request:
    scene_type: str = "human-activity"
    output_kind: str = "graph_only"
    detail: str = "low"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.output_kind not in OUTPUT_KINDS:
            raise SelectionError(f"unknown output_kind {self.output_kind!r}")
        if self.detail not in DETAIL_LEVELS:
            raise SelectionError(f"unknown detail {self.detail!r}")

    @classmethod
    def from_doc(cls, doc):
        if not isinstance(doc, dict):
            raise ParseError("request root must be an object")
        extra = doc.get("extra", {})
        if not isinstance(extra, dict):
            raise ParseError("request extra must be an object")
        return cls(
            doc.get("scene_type", "human-activity"),
            doc.get("output_kind", "graph_only"),
            doc.get("detail", "low"),
            {str(k): str(v) for k, v in extra.items()},
        )

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_doc(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"request is not valid JSON: {exc}") from None

    def to_doc(self):
        return {
            "scene_type": self.scene_type,
            "output_kind": self.output_kind,
            "detail": self.detail,
            "extra": dict(self.extra),
        }

    def fingerprint(self):
        return hashlib.sha256(_canonical(self.to_doc()).encode()).hexdigest()

    def lookup(self, path):
        """Resolve a dotted field path; ``None`` when absent."""
        head, _, rest = path.partition(".")
        if head == "extra":
            return self.extra.get(rest) if rest else None
        if rest or head not in ("scene_type", "output_kind", "detail"):
            return None
        return getattr(self, head)


@dataclass(frozen=True)
class Condition:
    field: str
    op: str
    value: object

    def holds(self, request):
        actual = request.lookup(self.field)
        if self.op == "eq":
            return actual == self.value
        if self.op == "ne":
            return actual != self.value
        return actual is not None and actual in self.value


@dataclass(frozen=True)
class StageSpec:
    stage_id: str
    params: dict = field(default_factory=dict)

    def to_doc(self):
        return {"stage": self.stage_id, "params": dict(self.params)}


@dataclass(frozen=True)
class Rule:
    id: str
    priority: int
    when: tuple
    then_stages: tuple

    def matches(self, request):
        return all(c.holds(request) for c in self.when)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    version: str = "1"

    def __len__(self):
        return len(self.rules)


@dataclass(frozen=True)
class PipelinePlan:
    stages: tuple
    request_fingerprint: str
    fired: tuple = ()

    @property
    def stage_ids(self):
        return [s.stage_id for s in self.stages]

    def to_doc(self):
        return {
            "request_fingerprint": self.request_fingerprint,
            "fired": list(self.fired),
            "stages": [s.to_doc() for s in self.stages],
        }

    def dumps(self):
        return _canonical(self.to_doc()) + "\n"


def _is_scalar(v):
    return isinstance(v, (str, int, float, bool))


def rules_from_doc(doc):
    if not isinstance(doc, dict) or not isinstance(doc.get("rules"), list):
        raise ParseError("rules document needs a 'rules' array")
    rules = []
    seen = set()
    for i, r in enumerate(doc["rules"]):
        try:
            rid = r["id"]
            priority = r.get("priority", 0)
            when = []
            for c in r.get("when", []):
                op = c["op"]
                if op not in OPERATORS:
                    raise ParseError(f"rule {rid!r}: unknown operator {op!r}")
                value = c["value"]
                if op == "in":
                    if not isinstance(value, list):
                        raise ParseError(f"rule {rid!r}: 'in' needs a list value")
                    value = tuple(value)
                when.append(Condition(c["field"], op, value))
            stages = []
            for s in r.get("then", []):
                params = s.get("params", {})
                if not isinstance(params, dict) or not all(_is_scalar(v) for v in params.values()):
                    raise ParseError(f"rule {rid!r}: stage params must map to scalars")
                stages.append(StageSpec(s["stage"], dict(params)))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"rule record {i}: malformed ({exc!r})") from None
        if not isinstance(priority, int) or isinstance(priority, bool):
            raise ParseError(f"rule {rid!r}: priority must be an integer")
        if rid in seen:
            raise ParseError(f"duplicate rule id {rid!r}")
        seen.add(rid)
        rules.append(Rule(rid, priority, tuple(when), tuple(stages)))
    return RuleSet(tuple(rules), str(doc.get("version", "1")))


def load_rules(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"rules file is not valid JSON: {exc}") from None
    return rules_from_doc(doc)


def validate_plan(stages, registry):
    """Check stage ids are registered, unique and in dependency order."""
    available = set(registry.pipeline_inputs)
    seen = set()
    for spec in stages:
        if spec.stage_id in seen:
            raise SelectionError(f"stage {spec.stage_id!r} appears twice")
        seen.add(spec.stage_id)
        info = registry.entries.get(spec.stage_id)
        if info is None:
            raise SelectionError(f"unknown stage {spec.stage_id!r}")
        for kind in info.inputs:
            if kind not in available:
                raise SelectionError(f"stage {spec.stage_id!r} needs {kind!r}, which no earlier stage produces")
        available.update(info.outputs)


def select_plan(rules, request, registry):
    ranked = sorted(
        ((i, r) for i, r in enumerate(rules.rules) if r.matches(request)),
        key=lambda ir: (-ir[1].priority, ir[0]),
    )
    if not ranked:
        raise SelectionError("no rule matches the request")
    stages = []
    seen = set()
    for _, rule in ranked:
        for spec in rule.then_stages:
            if spec.stage_id not in seen:
                seen.add(spec.stage_id)
                stages.append(spec)
    if not stages:
        raise SelectionError("matching rules produced an empty plan")
    validate_plan(stages, registry)
    return PipelinePlan(tuple(stages), request.fingerprint(), tuple(r.id for _, r in ranked))
