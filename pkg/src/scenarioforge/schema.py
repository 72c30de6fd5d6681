"""Domain types and validation for worksheets, scenarios, and reviews.

All types are immutable values: list fields normalize to tuples at
construction and "mutation" means building a replacement with
``dataclasses.replace``. Validation never raises on bad content — it returns
a ``ValidationReport`` whose findings name the field and the violated rule.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Mapping, TYPE_CHECKING

if TYPE_CHECKING:
    from scenarioforge.taxonomy import RiskTaxonomy

TITLE_MAX_CHARS = 120
DESCRIPTION_MAX_CHARS = 300
SENTENCE_TERMINALS = ".!?"


def utc_now() -> str:
    """Current time as canonical UTC text (``YYYY-MM-DDTHH:MM:SS.ffffffZ``)."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def is_one_sentence(text: str) -> bool:
    """True when exactly one of ``. ! ?`` occurs and it is the final character.

    This is the testable proxy used for the one-sentence description rule;
    it deliberately rejects interior periods (including decimals).
    """
    if not text:
        return False
    terminals = sum(text.count(ch) for ch in SENTENCE_TERMINALS)
    return terminals == 1 and text[-1] in SENTENCE_TERMINALS


class Stage(str, Enum):
    """Expansion stages, totally ordered: titles/descriptions, elements,
    narrative/objective."""

    STAGE1 = "stage1"
    STAGE2 = "stage2"
    STAGE3 = "stage3"

    @property
    def ordinal(self) -> int:
        return int(self.value[-1])

    @property
    def previous(self) -> "Stage | None":
        return None if self.ordinal == 1 else Stage.from_ordinal(self.ordinal - 1)

    @classmethod
    def from_ordinal(cls, n: int) -> "Stage":
        return cls(f"stage{n}")

    @classmethod
    def ordered(cls) -> tuple["Stage", ...]:
        return (cls.STAGE1, cls.STAGE2, cls.STAGE3)


class StageState(str, Enum):
    NOT_STARTED = "not_started"
    DRAFTED = "drafted"
    PENDING_REVIEW = "pending_review"
    CHANGES_REQUESTED = "changes_requested"
    APPROVED = "approved"
    REJECTED = "rejected"


# Terminal states have no outgoing edges.
LEGAL_STATE_TRANSITIONS: dict[StageState, frozenset[StageState]] = {
    StageState.NOT_STARTED: frozenset({StageState.DRAFTED}),
    StageState.DRAFTED: frozenset({StageState.PENDING_REVIEW}),
    StageState.PENDING_REVIEW: frozenset(
        {StageState.APPROVED, StageState.CHANGES_REQUESTED, StageState.REJECTED}
    ),
    StageState.CHANGES_REQUESTED: frozenset({StageState.DRAFTED}),
    StageState.APPROVED: frozenset(),
    StageState.REJECTED: frozenset(),
}


def is_legal_transition(src: StageState, dst: StageState) -> bool:
    return dst in LEGAL_STATE_TRANSITIONS[src]


def is_legal_scenario_transition(s: "Scenario", stage: "Stage",
                                 target: StageState) -> bool:
    """Stage-machine edge legality plus the gate: a stage may only leave
    NotStarted while the stage before it is Approved."""
    if not is_legal_transition(s.stage_state(stage), target):
        return False
    prev = stage.previous
    if prev is not None and target is not StageState.NOT_STARTED:
        return s.stage_state(prev) is StageState.APPROVED
    return True


class ReviewVerdict(str, Enum):
    APPROVE = "approve"
    EDIT_AND_APPROVE = "edit_and_approve"
    REQUEST_REGENERATION = "request_regeneration"
    REJECT = "reject"


class RevisionOrigin(str, Enum):
    GENERATED = "generated"
    HUMAN_EDITED = "human_edited"


def _tuple_of(items: Iterable[Any]) -> tuple:
    return tuple(items)


@dataclass(frozen=True)
class UserDescriptor:
    """A party interacting with (or affected by) the system: role plus
    optional characteristics."""

    role: str
    characteristics: str = ""


@dataclass(frozen=True)
class ElicitationProvenance:
    """Where a worksheet's content came from (interview source, date, notes)."""

    source: str
    participants: tuple[str, ...] = ()
    elicited_on: str = ""
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "participants", _tuple_of(self.participants))


@dataclass(frozen=True)
class UseCaseWorksheet:
    """SME-elicited use case: the six worksheet elements plus provenance."""

    id: str
    name: str
    sector: str
    summary: str
    direct_users: tuple[UserDescriptor, ...]
    indirect_users: tuple[UserDescriptor, ...] = ()
    sub_sectors: tuple[str, ...] = ()
    intended_outcomes: tuple[str, ...] = ()
    positive_impacts: tuple[str, ...] = ()
    negative_impacts: tuple[str, ...] = ()
    kpis: tuple[str, ...] = ()
    provenance: ElicitationProvenance = ElicitationProvenance(source="unspecified")
    created_at: str = ""
    updated_at: str = ""
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("direct_users", "indirect_users", "sub_sectors",
                     "intended_outcomes", "positive_impacts", "negative_impacts",
                     "kpis"):
            object.__setattr__(self, name, _tuple_of(getattr(self, name)))
        if not self.created_at:
            object.__setattr__(self, "created_at", utc_now())
        if not self.updated_at:
            object.__setattr__(self, "updated_at", self.created_at)
        object.__setattr__(self, "extra", dict(self.extra))


@dataclass(frozen=True)
class TaggedRisk:
    """A risk statement tagged with a taxonomy category id."""

    text: str
    category_id: str


@dataclass(frozen=True)
class RevisionRecord:
    """One content snapshot in a scenario's append-only history."""

    index: int
    stage: Stage
    payload: Mapping[str, Any]
    origin: RevisionOrigin
    prompt_fingerprint: str | None = None
    timestamp: str = ""

    def __post_init__(self):
        object.__setattr__(self, "payload", dict(self.payload))
        if not self.timestamp:
            object.__setattr__(self, "timestamp", utc_now())


def _fresh_stage_states() -> dict[Stage, StageState]:
    return {stage: StageState.NOT_STARTED for stage in Stage.ordered()}


@dataclass(frozen=True)
class Scenario:
    """A testable implementation within a use case: twelve content elements
    plus per-stage review state and revision history."""

    id: str
    use_case_id: str
    sector: str
    title: str
    description: str
    narrative: str | None = None
    evaluation_objective: str | None = None
    direct_users: tuple[UserDescriptor, ...] = ()
    indirect_users: tuple[UserDescriptor, ...] = ()
    intended_outcomes: tuple[str, ...] = ()
    benefits: tuple[str, ...] = ()
    risks: tuple[TaggedRisk, ...] = ()
    kpis: tuple[str, ...] = ()
    stage_states: Mapping[Stage, StageState] = field(default_factory=_fresh_stage_states)
    feedback: Mapping[Stage, str] = field(default_factory=dict)
    revisions: tuple[RevisionRecord, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("direct_users", "indirect_users", "intended_outcomes",
                     "benefits", "risks", "kpis", "revisions"):
            object.__setattr__(self, name, _tuple_of(getattr(self, name)))
        states = dict(_fresh_stage_states())
        states.update(self.stage_states)
        object.__setattr__(self, "stage_states", states)
        object.__setattr__(self, "feedback", dict(self.feedback))
        object.__setattr__(self, "extra", dict(self.extra))

    def stage_state(self, stage: Stage) -> StageState:
        return self.stage_states[stage]

    @property
    def is_rejected(self) -> bool:
        return any(s is StageState.REJECTED for s in self.stage_states.values())

    def next_revision_index(self) -> int:
        return len(self.revisions)


@dataclass(frozen=True)
class ReviewDecision:
    """A human checkpoint outcome for one stage of one scenario."""

    reviewer: str
    scenario_id: str
    stage: Stage
    verdict: ReviewVerdict
    comments: str = ""
    edited_payload: Mapping[str, Any] | None = None
    timestamp: str = ""

    def __post_init__(self):
        if self.edited_payload is not None:
            object.__setattr__(self, "edited_payload", dict(self.edited_payload))
        if not self.timestamp:
            object.__setattr__(self, "timestamp", utc_now())


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    """One violated rule: which field, which rule, human-readable message."""

    field: str
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "findings", _tuple_of(self.findings))

    @property
    def ok(self) -> bool:
        return not self.findings

    def fields(self) -> set[str]:
        return {f.field for f in self.findings}

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "findings": [dataclasses.asdict(f) for f in self.findings],
        }


def _blank(text: str) -> bool:
    return not text or not text.strip()


def _check_entries(findings: list[Finding], field_name: str,
                   entries: Iterable[str]) -> None:
    for i, entry in enumerate(entries):
        if _blank(entry):
            findings.append(Finding(
                f"{field_name}[{i}]", "non_empty_entry",
                f"{field_name}[{i}] must be non-empty text"))


def _check_users(findings: list[Finding], field_name: str,
                 users: Iterable[UserDescriptor]) -> None:
    for i, user in enumerate(users):
        if _blank(user.role):
            findings.append(Finding(
                f"{field_name}[{i}].role", "non_empty",
                f"{field_name}[{i}].role must be non-empty"))


def validate_worksheet(w: UseCaseWorksheet) -> ValidationReport:
    """Check every worksheet invariant; findings are data, not failures."""
    findings: list[Finding] = []
    if _blank(w.id):
        findings.append(Finding("id", "non_empty", "id must be non-empty"))
    for name in ("name", "sector", "summary"):
        if _blank(getattr(w, name)):
            findings.append(Finding(name, "non_empty", f"{name} must be non-empty"))
    if not w.direct_users:
        findings.append(Finding(
            "direct_users", "min_one_entry", "at least one direct user is required"))
    _check_users(findings, "direct_users", w.direct_users)
    _check_users(findings, "indirect_users", w.indirect_users)
    if not w.intended_outcomes:
        findings.append(Finding(
            "intended_outcomes", "min_one_entry",
            "at least one intended outcome is required"))
    if not w.kpis:
        findings.append(Finding("kpis", "min_one_entry", "at least one KPI is required"))
    for name in ("sub_sectors", "intended_outcomes", "positive_impacts",
                 "negative_impacts", "kpis"):
        _check_entries(findings, name, getattr(w, name))
    if _blank(w.provenance.source):
        findings.append(Finding(
            "provenance.source", "non_empty", "provenance.source must be non-empty"))
    return ValidationReport(tuple(findings))


def validate_title(title: str, field_name: str = "title") -> list[Finding]:
    findings: list[Finding] = []
    if _blank(title):
        findings.append(Finding(field_name, "non_empty", "title must be non-empty"))
    elif len(title) > TITLE_MAX_CHARS:
        findings.append(Finding(
            field_name, "max_length",
            f"title exceeds {TITLE_MAX_CHARS} characters (got {len(title)})"))
    return findings


def validate_description(description: str, field_name: str = "description") -> list[Finding]:
    findings: list[Finding] = []
    if _blank(description):
        findings.append(Finding(field_name, "non_empty", "description must be non-empty"))
        return findings
    if len(description) > DESCRIPTION_MAX_CHARS:
        findings.append(Finding(
            field_name, "max_length",
            f"description exceeds {DESCRIPTION_MAX_CHARS} characters "
            f"(got {len(description)})"))
    if not is_one_sentence(description):
        findings.append(Finding(
            field_name, "one_sentence",
            "description must be exactly one sentence (a single terminal "
            "punctuation mark, at the end)"))
    return findings


# Stage-2 element lists that must stay empty until Stage 1 is approved.
STAGE2_ELEMENT_FIELDS = (
    "direct_users", "indirect_users", "intended_outcomes", "benefits",
    "risks", "kpis",
)


def validate_scenario(
    s: Scenario,
    t: "RiskTaxonomy",
    *,
    parent: UseCaseWorksheet | None = None,
    known_use_case_ids: Iterable[str] | None = None,
) -> ValidationReport:
    """Check every scenario invariant relative to a taxonomy and stage states.

    ``parent`` (when supplied) enables the sector-consistency check;
    ``known_use_case_ids`` (when supplied) enables reference resolution.
    Both are optional so the function stays pure and store-independent.
    """
    findings: list[Finding] = []
    if _blank(s.id):
        findings.append(Finding("id", "non_empty", "id must be non-empty"))
    if _blank(s.use_case_id):
        findings.append(Finding("use_case_id", "non_empty", "use_case_id must be non-empty"))
    if _blank(s.sector):
        findings.append(Finding("sector", "non_empty", "sector must be non-empty"))
    findings.extend(validate_title(s.title))
    findings.extend(validate_description(s.description))

    # Stage-state ordering: a later stage may only leave NotStarted once the
    # stage before it is Approved.
    for stage in (Stage.STAGE2, Stage.STAGE3):
        state = s.stage_state(stage)
        prev = s.stage_state(stage.previous)
        if state is not StageState.NOT_STARTED and prev is not StageState.APPROVED:
            findings.append(Finding(
                f"stage_states.{stage.value}", "stage_ordering",
                f"{stage.value} is {state.value} but {stage.previous.value} "
                f"is not approved"))

    # Stage-gated content.
    if s.stage_state(Stage.STAGE1) is not StageState.APPROVED:
        for name in STAGE2_ELEMENT_FIELDS:
            if getattr(s, name):
                findings.append(Finding(
                    name, "stage_ordering",
                    f"{name} must be empty until stage1 is approved"))
    if s.stage_state(Stage.STAGE2) is not StageState.APPROVED:
        for name in ("narrative", "evaluation_objective"):
            if getattr(s, name) is not None:
                findings.append(Finding(
                    name, "stage_ordering",
                    f"{name} must be absent until stage2 is approved"))

    for name in ("narrative", "evaluation_objective"):
        value = getattr(s, name)
        if value is not None and _blank(value):
            findings.append(Finding(name, "non_empty", f"{name} must be non-empty when present"))

    _check_users(findings, "direct_users", s.direct_users)
    _check_users(findings, "indirect_users", s.indirect_users)
    for name in ("intended_outcomes", "benefits", "kpis"):
        _check_entries(findings, name, getattr(s, name))

    category_ids = t.category_ids()
    for i, risk in enumerate(s.risks):
        if _blank(risk.text):
            findings.append(Finding(
                f"risks[{i}].text", "non_empty", f"risks[{i}].text must be non-empty"))
        if _blank(risk.category_id):
            findings.append(Finding(
                f"risks[{i}].category_id", "non_empty",
                f"risks[{i}].category_id must be non-empty"))
        elif risk.category_id not in category_ids:
            findings.append(Finding(
                f"risks[{i}].category_id", "unknown_category",
                f"risks[{i}] references unknown taxonomy category "
                f"'{risk.category_id}'"))

    for i, rev in enumerate(s.revisions):
        if rev.index != i:
            findings.append(Finding(
                f"revisions[{i}].index", "revision_indices",
                f"revision indices must be contiguous from 0 (got {rev.index} "
                f"at position {i})"))
        if rev.origin is RevisionOrigin.GENERATED and not rev.prompt_fingerprint:
            findings.append(Finding(
                f"revisions[{i}].prompt_fingerprint", "fingerprint_required",
                "generated revisions must carry a prompt fingerprint"))

    if known_use_case_ids is not None and s.use_case_id not in set(known_use_case_ids):
        findings.append(Finding(
            "use_case_id", "unresolved_reference",
            f"use_case_id '{s.use_case_id}' does not resolve"))
    if parent is not None:
        if s.use_case_id != parent.id:
            findings.append(Finding(
                "use_case_id", "unresolved_reference",
                f"use_case_id '{s.use_case_id}' does not match parent '{parent.id}'"))
        elif s.sector != parent.sector:
            findings.append(Finding(
                "sector", "sector_mismatch",
                f"sector '{s.sector}' differs from parent use case sector "
                f"'{parent.sector}'"))
    return ValidationReport(tuple(findings))


# ---------------------------------------------------------------------------
# Stage-shaped payloads (revision snapshots, review edits)
# ---------------------------------------------------------------------------

STAGE_PAYLOAD_FIELDS: dict[Stage, tuple[str, ...]] = {
    Stage.STAGE1: ("title", "description"),
    Stage.STAGE2: STAGE2_ELEMENT_FIELDS,
    Stage.STAGE3: ("narrative", "evaluation_objective"),
}


def stage_payload(s: Scenario, stage: Stage) -> dict[str, Any]:
    """Snapshot the current content owned by ``stage`` as a plain dict."""
    payload: dict[str, Any] = {}
    for name in STAGE_PAYLOAD_FIELDS[stage]:
        value = getattr(s, name)
        if name in ("direct_users", "indirect_users"):
            payload[name] = [dataclasses.asdict(u) for u in value]
        elif name == "risks":
            payload[name] = [dataclasses.asdict(r) for r in value]
        elif isinstance(value, tuple):
            payload[name] = list(value)
        else:
            payload[name] = value
    return payload


def validate_stage_payload(stage: Stage, payload: Mapping[str, Any],
                           t: "RiskTaxonomy") -> ValidationReport:
    """Validate an edited or parsed stage payload before it replaces content."""
    findings: list[Finding] = []
    expected = set(STAGE_PAYLOAD_FIELDS[stage])
    for key in payload:
        if key not in expected:
            findings.append(Finding(
                key, "unknown_field", f"'{key}' is not a {stage.value} field"))
    for key in expected - set(payload):
        findings.append(Finding(
            key, "missing_field", f"{stage.value} payload requires '{key}'"))
    if findings:
        return ValidationReport(tuple(findings))

    if stage is Stage.STAGE1:
        findings.extend(validate_title(str(payload["title"])))
        findings.extend(validate_description(str(payload["description"])))
    elif stage is Stage.STAGE2:
        for name in ("direct_users", "indirect_users"):
            users = payload[name]
            if not isinstance(users, (list, tuple)) or not users:
                findings.append(Finding(
                    name, "min_one_entry", f"{name} requires at least one entry"))
                continue
            for i, u in enumerate(users):
                role = u.get("role", "") if isinstance(u, Mapping) else ""
                if _blank(role):
                    findings.append(Finding(
                        f"{name}[{i}].role", "non_empty",
                        f"{name}[{i}].role must be non-empty"))
        for name in ("intended_outcomes", "benefits", "kpis"):
            entries = payload[name]
            if not isinstance(entries, (list, tuple)) or not entries:
                findings.append(Finding(
                    name, "min_one_entry", f"{name} requires at least one entry"))
                continue
            _check_entries(findings, name, [str(e) for e in entries])
        risks = payload["risks"]
        if not isinstance(risks, (list, tuple)) or not risks:
            findings.append(Finding(
                "risks", "min_one_entry", "risks requires at least one entry"))
        else:
            ids = t.category_ids()
            for i, r in enumerate(risks):
                text = r.get("text", "") if isinstance(r, Mapping) else ""
                cat = r.get("category_id", "") if isinstance(r, Mapping) else ""
                if _blank(text):
                    findings.append(Finding(
                        f"risks[{i}].text", "non_empty",
                        f"risks[{i}].text must be non-empty"))
                if _blank(cat):
                    findings.append(Finding(
                        f"risks[{i}].category_id", "non_empty",
                        f"risks[{i}].category_id must be non-empty"))
                elif cat not in ids:
                    findings.append(Finding(
                        f"risks[{i}].category_id", "unknown_category",
                        f"risks[{i}] references unknown taxonomy category '{cat}'"))
    else:
        for name in ("narrative", "evaluation_objective"):
            if _blank(str(payload[name] or "")):
                findings.append(Finding(
                    name, "non_empty", f"{name} must be non-empty"))
    return ValidationReport(tuple(findings))


def apply_stage_payload(s: Scenario, stage: Stage,
                        payload: Mapping[str, Any]) -> Scenario:
    """Return a copy of ``s`` with ``stage``'s content replaced by ``payload``.

    The payload must already be validated; this only converts shapes.
    """
    updates: dict[str, Any] = {}
    for name in STAGE_PAYLOAD_FIELDS[stage]:
        value = payload[name]
        if name in ("direct_users", "indirect_users"):
            updates[name] = tuple(
                UserDescriptor(role=u["role"], characteristics=u.get("characteristics", ""))
                for u in value)
        elif name == "risks":
            updates[name] = tuple(
                TaggedRisk(text=r["text"], category_id=r["category_id"]) for r in value)
        elif isinstance(getattr(s, name), tuple):
            updates[name] = tuple(value)
        else:
            updates[name] = value
    return dataclasses.replace(s, **updates)
