"""Canonical document encoding: stable-order JSON, one document per file.

Every document kind serializes with a fixed key order (``kind`` first), so
structurally equal documents yield identical bytes and files diff cleanly.
``parse`` is strict by default (unknown fields are errors); lenient mode
preserves unknown top-level fields so imported documents round-trip.
"""

from __future__ import annotations

import json
from typing import Any, Callable, Mapping

from scenarioforge.errors import ParseError
from scenarioforge.jobs import ExpansionJob, JobStatus
from scenarioforge.rubric import (
    CategoryAssessment,
    ReadinessVerdict,
    RubricAssessment,
    RubricCategory,
    RubricDefinition,
)
from scenarioforge.schema import (
    ElicitationProvenance,
    RevisionOrigin,
    RevisionRecord,
    Scenario,
    Stage,
    StageState,
    TaggedRisk,
    UseCaseWorksheet,
    UserDescriptor,
)
from scenarioforge.taxonomy import RiskCategory, RiskTaxonomy

STRICT = "strict"
LENIENT = "lenient"

Document = (
    UseCaseWorksheet | Scenario | RiskTaxonomy | RubricDefinition
    | RubricAssessment | ExpansionJob
)


def _sorted_json(value: Any) -> Any:
    """Recursively order mapping keys so free-form payloads are canonical."""
    if isinstance(value, Mapping):
        return {k: _sorted_json(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_sorted_json(v) for v in value]
    return value


def _with_extras(d: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    for key in sorted(extra):
        d[key] = _sorted_json(extra[key])
    return d


# ---------------------------------------------------------------------------
# Reading helpers
# ---------------------------------------------------------------------------

class _Reader:
    """Pulls typed fields out of a decoded JSON object with path-aware errors."""

    def __init__(self, data: Any, path: str, mode: str):
        if not isinstance(data, Mapping):
            raise ParseError(f"expected an object, got {type(data).__name__}", path=path)
        self.data = data
        self.path = path
        self.mode = mode
        self._seen: set[str] = set()

    def _fetch(self, key: str, required: bool):
        self._seen.add(key)
        if key not in self.data:
            if required:
                raise ParseError(f"missing field '{key}'", path=self.path)
            return None
        return self.data[key]

    def str_(self, key: str, required: bool = True, default: str = "") -> str:
        value = self._fetch(key, required)
        if value is None:
            return default
        if not isinstance(value, str):
            raise ParseError(f"field '{key}' must be a string", path=f"{self.path}.{key}")
        return value

    def opt_str(self, key: str) -> str | None:
        value = self._fetch(key, required=False)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ParseError(f"field '{key}' must be a string or null",
                             path=f"{self.path}.{key}")
        return value

    def int_(self, key: str, required: bool = True, default: int = 0) -> int:
        value = self._fetch(key, required)
        if value is None:
            return default
        if not isinstance(value, int) or isinstance(value, bool):
            raise ParseError(f"field '{key}' must be an integer",
                             path=f"{self.path}.{key}")
        return value

    def opt_int(self, key: str) -> int | None:
        value = self._fetch(key, required=False)
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool):
            raise ParseError(f"field '{key}' must be an integer or null",
                             path=f"{self.path}.{key}")
        return value

    def num_(self, key: str, required: bool = True, default: float = 0.0) -> float:
        value = self._fetch(key, required)
        if value is None:
            return default
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"field '{key}' must be a number", path=f"{self.path}.{key}")
        return float(value)

    def list_(self, key: str, required: bool = True) -> list:
        value = self._fetch(key, required)
        if value is None:
            return []
        if not isinstance(value, list):
            raise ParseError(f"field '{key}' must be a list", path=f"{self.path}.{key}")
        return value

    def map_(self, key: str, required: bool = True) -> Mapping[str, Any]:
        value = self._fetch(key, required)
        if value is None:
            return {}
        if not isinstance(value, Mapping):
            raise ParseError(f"field '{key}' must be an object", path=f"{self.path}.{key}")
        return value

    def str_list(self, key: str, required: bool = True) -> list[str]:
        items = self.list_(key, required)
        for i, item in enumerate(items):
            if not isinstance(item, str):
                raise ParseError("list entries must be strings",
                                 path=f"{self.path}.{key}[{i}]")
        return items

    def enum_(self, key: str, enum_cls, required: bool = True, default=None):
        value = self._fetch(key, required)
        if value is None:
            return default
        return _enum(enum_cls, value, f"{self.path}.{key}")

    def extras(self) -> dict[str, Any]:
        unknown = [k for k in self.data if k not in self._seen]
        if not unknown:
            return {}
        if self.mode == STRICT:
            raise ParseError(f"unknown field '{unknown[0]}'",
                             path=f"{self.path}.{unknown[0]}")
        return {k: self.data[k] for k in unknown}


def _enum(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        raise ParseError(
            f"invalid {enum_cls.__name__} value {value!r} "
            f"(expected one of {[m.value for m in enum_cls]})", path=path) from None


def _user_to_dict(u: UserDescriptor) -> dict[str, Any]:
    return {"role": u.role, "characteristics": u.characteristics}


def _user_from(obj: Any, path: str, mode: str) -> UserDescriptor:
    r = _Reader(obj, path, mode)
    user = UserDescriptor(role=r.str_("role"),
                          characteristics=r.str_("characteristics", required=False))
    r.extras()
    return user


def _risk_to_dict(risk: TaggedRisk) -> dict[str, Any]:
    return {"text": risk.text, "category_id": risk.category_id}


def _risk_from(obj: Any, path: str, mode: str) -> TaggedRisk:
    r = _Reader(obj, path, mode)
    risk = TaggedRisk(text=r.str_("text"), category_id=r.str_("category_id"))
    r.extras()
    return risk


# ---------------------------------------------------------------------------
# Use case worksheet
# ---------------------------------------------------------------------------

def _worksheet_to_dict(w: UseCaseWorksheet) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "use_case_worksheet",
        "id": w.id,
        "name": w.name,
        "sector": w.sector,
        "sub_sectors": list(w.sub_sectors),
        "summary": w.summary,
        "direct_users": [_user_to_dict(u) for u in w.direct_users],
        "indirect_users": [_user_to_dict(u) for u in w.indirect_users],
        "intended_outcomes": list(w.intended_outcomes),
        "positive_impacts": list(w.positive_impacts),
        "negative_impacts": list(w.negative_impacts),
        "kpis": list(w.kpis),
        "provenance": {
            "source": w.provenance.source,
            "participants": list(w.provenance.participants),
            "elicited_on": w.provenance.elicited_on,
            "notes": w.provenance.notes,
        },
        "created_at": w.created_at,
        "updated_at": w.updated_at,
    }
    return _with_extras(d, w.extra)


def _worksheet_from(data: Mapping[str, Any], mode: str) -> UseCaseWorksheet:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    prov_reader = _Reader(r.map_("provenance"), "$.provenance", mode)
    provenance = ElicitationProvenance(
        source=prov_reader.str_("source"),
        participants=tuple(prov_reader.str_list("participants", required=False)),
        elicited_on=prov_reader.str_("elicited_on", required=False),
        notes=prov_reader.str_("notes", required=False),
    )
    prov_reader.extras()
    worksheet = UseCaseWorksheet(
        id=r.str_("id"),
        name=r.str_("name"),
        sector=r.str_("sector"),
        sub_sectors=tuple(r.str_list("sub_sectors", required=False)),
        summary=r.str_("summary"),
        direct_users=tuple(
            _user_from(u, f"$.direct_users[{i}]", mode)
            for i, u in enumerate(r.list_("direct_users"))),
        indirect_users=tuple(
            _user_from(u, f"$.indirect_users[{i}]", mode)
            for i, u in enumerate(r.list_("indirect_users", required=False))),
        intended_outcomes=tuple(r.str_list("intended_outcomes")),
        positive_impacts=tuple(r.str_list("positive_impacts", required=False)),
        negative_impacts=tuple(r.str_list("negative_impacts", required=False)),
        kpis=tuple(r.str_list("kpis")),
        provenance=provenance,
        created_at=r.str_("created_at"),
        updated_at=r.str_("updated_at"),
        extra=r.extras(),
    )
    return worksheet


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

def _revision_to_dict(rev: RevisionRecord) -> dict[str, Any]:
    return {
        "index": rev.index,
        "stage": rev.stage.value,
        "origin": rev.origin.value,
        "prompt_fingerprint": rev.prompt_fingerprint,
        "timestamp": rev.timestamp,
        "payload": _sorted_json(rev.payload),
    }


def _revision_from(obj: Any, path: str, mode: str) -> RevisionRecord:
    r = _Reader(obj, path, mode)
    rev = RevisionRecord(
        index=r.int_("index"),
        stage=r.enum_("stage", Stage),
        origin=r.enum_("origin", RevisionOrigin),
        prompt_fingerprint=r.opt_str("prompt_fingerprint"),
        timestamp=r.str_("timestamp"),
        payload=dict(r.map_("payload")),
    )
    r.extras()
    return rev


def _scenario_to_dict(s: Scenario) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "scenario",
        "id": s.id,
        "use_case_id": s.use_case_id,
        "sector": s.sector,
        "title": s.title,
        "description": s.description,
        "narrative": s.narrative,
        "evaluation_objective": s.evaluation_objective,
        "direct_users": [_user_to_dict(u) for u in s.direct_users],
        "indirect_users": [_user_to_dict(u) for u in s.indirect_users],
        "intended_outcomes": list(s.intended_outcomes),
        "benefits": list(s.benefits),
        "risks": [_risk_to_dict(risk) for risk in s.risks],
        "kpis": list(s.kpis),
        "stage_states": {
            stage.value: s.stage_states[stage].value for stage in Stage.ordered()},
        "feedback": {
            stage.value: s.feedback[stage]
            for stage in Stage.ordered() if stage in s.feedback},
        "revisions": [_revision_to_dict(rev) for rev in s.revisions],
    }
    return _with_extras(d, s.extra)


def _scenario_from(data: Mapping[str, Any], mode: str) -> Scenario:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    states_raw = r.map_("stage_states")
    stage_states: dict[Stage, StageState] = {}
    for key, value in states_raw.items():
        stage = _enum(Stage, key, f"$.stage_states.{key}")
        stage_states[stage] = _enum(StageState, value, f"$.stage_states.{key}")
    feedback_raw = r.map_("feedback", required=False)
    feedback = {
        _enum(Stage, key, f"$.feedback.{key}"): str(value)
        for key, value in feedback_raw.items()}
    return Scenario(
        id=r.str_("id"),
        use_case_id=r.str_("use_case_id"),
        sector=r.str_("sector"),
        title=r.str_("title"),
        description=r.str_("description"),
        narrative=r.opt_str("narrative"),
        evaluation_objective=r.opt_str("evaluation_objective"),
        direct_users=tuple(
            _user_from(u, f"$.direct_users[{i}]", mode)
            for i, u in enumerate(r.list_("direct_users", required=False))),
        indirect_users=tuple(
            _user_from(u, f"$.indirect_users[{i}]", mode)
            for i, u in enumerate(r.list_("indirect_users", required=False))),
        intended_outcomes=tuple(r.str_list("intended_outcomes", required=False)),
        benefits=tuple(r.str_list("benefits", required=False)),
        risks=tuple(
            _risk_from(x, f"$.risks[{i}]", mode)
            for i, x in enumerate(r.list_("risks", required=False))),
        kpis=tuple(r.str_list("kpis", required=False)),
        stage_states=stage_states,
        feedback=feedback,
        revisions=tuple(
            _revision_from(x, f"$.revisions[{i}]", mode)
            for i, x in enumerate(r.list_("revisions", required=False))),
        extra=r.extras(),
    )


# ---------------------------------------------------------------------------
# Risk taxonomy
# ---------------------------------------------------------------------------

def _taxonomy_to_dict(t: RiskTaxonomy) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "risk_taxonomy",
        "source_name": t.source_name,
        "version": t.version,
        "categories": [
            {"id": c.id, "name": c.name, "summary": c.summary} for c in t.categories],
    }
    return _with_extras(d, t.extra)


def _taxonomy_from(data: Mapping[str, Any], mode: str) -> RiskTaxonomy:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    categories = []
    for i, obj in enumerate(r.list_("categories")):
        cr = _Reader(obj, f"$.categories[{i}]", mode)
        categories.append(RiskCategory(
            id=cr.str_("id"), name=cr.str_("name"), summary=cr.str_("summary")))
        cr.extras()
    return RiskTaxonomy(
        source_name=r.str_("source_name"),
        version=r.str_("version"),
        categories=tuple(categories),
        extra=r.extras(),
    )


# ---------------------------------------------------------------------------
# Rubric definition / assessment
# ---------------------------------------------------------------------------

def _rubric_to_dict(rub: RubricDefinition) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "rubric_definition",
        "categories": [
            {
                "id": c.id,
                "name": c.name,
                "guiding_questions": list(c.guiding_questions),
                "autochecks": list(c.autochecks),
            }
            for c in rub.categories
        ],
        "scale_max": rub.scale_max,
        "weights": {c.id: rub.weights.get(c.id, 1.0) for c in rub.categories},
        "readiness_threshold": rub.readiness_threshold,
        "narrative_min_chars": rub.narrative_min_chars,
        "mandatory_autochecks": list(rub.mandatory_autochecks),
    }
    return _with_extras(d, rub.extra)


def _rubric_from(data: Mapping[str, Any], mode: str) -> RubricDefinition:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    categories = []
    for i, obj in enumerate(r.list_("categories")):
        cr = _Reader(obj, f"$.categories[{i}]", mode)
        categories.append(RubricCategory(
            id=cr.str_("id"),
            name=cr.str_("name"),
            guiding_questions=tuple(cr.str_list("guiding_questions")),
            autochecks=tuple(cr.str_list("autochecks", required=False)),
        ))
        cr.extras()
    weights_raw = r.map_("weights", required=False)
    weights: dict[str, float] = {}
    for key, value in weights_raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError("weights must be numbers", path=f"$.weights.{key}")
        weights[key] = float(value)
    return RubricDefinition(
        categories=tuple(categories),
        scale_max=r.int_("scale_max", required=False, default=5),
        weights=weights,
        readiness_threshold=r.num_("readiness_threshold", required=False, default=0.7),
        narrative_min_chars=r.int_("narrative_min_chars", required=False, default=400),
        mandatory_autochecks=tuple(r.str_list("mandatory_autochecks", required=False)),
        extra=r.extras(),
    )


def _assessment_to_dict(a: RubricAssessment) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "rubric_assessment",
        "id": a.id,
        "scenario_id": a.scenario_id,
        "per_category": {
            cat: {
                "auto_findings": list(ca.auto_findings),
                "human_score": ca.human_score,
                "notes": ca.notes,
            }
            for cat, ca in sorted(a.per_category.items())
        },
        "weighted_score": a.weighted_score,
        "verdict": a.verdict.value,
        "assessed_by": a.assessed_by,
        "timestamp": a.timestamp,
    }
    return _with_extras(d, a.extra)


def _assessment_from(data: Mapping[str, Any], mode: str) -> RubricAssessment:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    per_category: dict[str, CategoryAssessment] = {}
    for cat, obj in r.map_("per_category").items():
        cr = _Reader(obj, f"$.per_category.{cat}", mode)
        per_category[cat] = CategoryAssessment(
            auto_findings=tuple(cr.str_list("auto_findings", required=False)),
            human_score=cr.opt_int("human_score"),
            notes=cr.str_("notes", required=False),
        )
        cr.extras()
    return RubricAssessment(
        id=r.str_("id"),
        scenario_id=r.str_("scenario_id"),
        per_category=per_category,
        weighted_score=r.num_("weighted_score"),
        verdict=r.enum_("verdict", ReadinessVerdict),
        assessed_by=r.str_("assessed_by"),
        timestamp=r.str_("timestamp"),
        extra=r.extras(),
    )


# ---------------------------------------------------------------------------
# Expansion job
# ---------------------------------------------------------------------------

def _job_to_dict(j: ExpansionJob) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": "expansion_job",
        "id": j.id,
        "use_case_id": j.use_case_id,
        "stage": j.stage.value,
        "status": j.status.value,
        "target_count": j.target_count,
        "attempts": j.attempts,
        "backend_id": j.backend_id,
        "detail": j.detail,
        "scenario_ids": list(j.scenario_ids),
        "created_at": j.created_at,
    }
    return _with_extras(d, j.extra)


def _job_from(data: Mapping[str, Any], mode: str) -> ExpansionJob:
    r = _Reader(data, "$", mode)
    r.str_("kind")
    return ExpansionJob(
        id=r.str_("id"),
        use_case_id=r.str_("use_case_id"),
        stage=r.enum_("stage", Stage),
        status=r.enum_("status", JobStatus),
        target_count=r.opt_int("target_count"),
        attempts=r.int_("attempts", required=False),
        backend_id=r.str_("backend_id", required=False),
        detail=r.str_("detail", required=False),
        scenario_ids=tuple(r.str_list("scenario_ids", required=False)),
        created_at=r.str_("created_at"),
        extra=r.extras(),
    )


# ---------------------------------------------------------------------------
# Public surface
# ---------------------------------------------------------------------------

_TO_DICT: dict[type, tuple[str, Callable[[Any], dict[str, Any]]]] = {
    UseCaseWorksheet: ("use_case_worksheet", _worksheet_to_dict),
    Scenario: ("scenario", _scenario_to_dict),
    RiskTaxonomy: ("risk_taxonomy", _taxonomy_to_dict),
    RubricDefinition: ("rubric_definition", _rubric_to_dict),
    RubricAssessment: ("rubric_assessment", _assessment_to_dict),
    ExpansionJob: ("expansion_job", _job_to_dict),
}

_FROM_DICT: dict[str, Callable[[Mapping[str, Any], str], Document]] = {
    "use_case_worksheet": _worksheet_from,
    "scenario": _scenario_from,
    "risk_taxonomy": _taxonomy_from,
    "rubric_definition": _rubric_from,
    "rubric_assessment": _assessment_from,
    "expansion_job": _job_from,
}

DOCUMENT_KINDS = tuple(_FROM_DICT)


def kind_of(doc: Document) -> str:
    try:
        return _TO_DICT[type(doc)][0]
    except KeyError:
        raise TypeError(f"not a canonical document type: {type(doc).__name__}") from None


def doc_to_dict(doc: Document) -> dict[str, Any]:
    """Canonical (ordered) dict form of a document."""
    try:
        _, fn = _TO_DICT[type(doc)]
    except KeyError:
        raise TypeError(f"not a canonical document type: {type(doc).__name__}") from None
    return fn(doc)


def serialize(doc: Document) -> bytes:
    """Canonical bytes: UTF-8 JSON, two-space indent, trailing newline."""
    return (json.dumps(doc_to_dict(doc), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def parse_obj(data: Any, mode: str = STRICT) -> Document:
    """Parse an already-decoded JSON object into a typed document."""
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"unknown parse mode: {mode!r}")
    if not isinstance(data, Mapping):
        raise ParseError(f"expected an object, got {type(data).__name__}")
    kind = data.get("kind")
    if kind is None:
        raise ParseError("missing field 'kind'")
    fn = _FROM_DICT.get(kind)
    if fn is None:
        raise ParseError(
            f"unknown document kind {kind!r} (expected one of {list(_FROM_DICT)})",
            path="$.kind")
    return fn(data, mode)


def parse(data: bytes | str, mode: str = STRICT) -> Document:
    """Parse canonical bytes into a typed document.

    Raises ParseError with position and reason on malformed input.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"invalid UTF-8: {e.reason}", path="$") from e
    else:
        text = data
    if not text.strip():
        raise ParseError("empty document")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    return parse_obj(obj, mode)
