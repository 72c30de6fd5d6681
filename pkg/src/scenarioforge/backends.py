"""Text-generation backends behind one small interface.

The mock backend is the default: its output is a pure function of
(rendered prompt, seed), emitted in the same canonical format the prompts ask
a real model for, so the whole pipeline runs deterministically with no
network. The HTTP backend posts prompts to a configured endpoint; vendor
specifics stay in configuration.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from scenarioforge.errors import (
    BackendStatusError,
    BackendTimeoutError,
    BackendUnreachableError,
    ParseError,
    UnknownBackendError,
)
from scenarioforge.parsing import format_elements, format_stage1, format_stage3
from scenarioforge.schema import Stage, TaggedRisk, UserDescriptor

MOCK_BACKEND_ID = "mock"


@dataclass(frozen=True)
class GenerationRequest:
    rendered_prompt: str
    stage: Stage
    backend_id: str
    seed: int | None = None

    def __post_init__(self):
        if not self.rendered_prompt.strip():
            raise ValueError("rendered_prompt must be non-empty")


@dataclass(frozen=True)
class GenerationResponse:
    raw_text: str
    backend_id: str
    latency_s: float
    fingerprint: str


def request_fingerprint(rendered_prompt: str, backend_id: str,
                        seed: int | None) -> str:
    digest = hashlib.sha256()
    digest.update(backend_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(str(seed).encode("utf-8"))
    digest.update(b"\x00")
    digest.update(rendered_prompt.encode("utf-8"))
    return digest.hexdigest()


class Backend(Protocol):
    def complete(self, request: GenerationRequest) -> str: ...


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------

# Prompt markers the mock reads. The shipped templates contain all of them;
# each has a fallback so arbitrary prompts still produce usable output.
_COUNT_MARKER = re.compile(r"exactly\s+(\d+)")
_USE_CASE_MARKER = re.compile(r"^Use case:\s*(.+)$", re.MULTILINE)
_TITLE_MARKER = re.compile(r"^Scenario title:\s*(.+)$", re.MULTILINE)
_CATEGORY_MARKER = re.compile(r"^-\s*([a-z0-9-]+):", re.MULTILINE)

_FALLBACK_CATEGORY_IDS = (
    "confabulation", "data-privacy", "human-ai-configuration",
    "information-security",
)

_TITLE_LEADS = (
    "Automated", "Assisted", "Continuous", "Real-Time", "Adaptive",
    "Integrated", "Proactive", "Guided", "Contextual", "Policy-Aware",
    "Audit-Ready", "Cross-Team", "Queue-Based", "Supervised", "Tiered",
    "On-Demand", "Structured", "Escalation-Aware", "Batch", "Priority",
    "Checklist-Driven", "Evidence-Linked", "Deadline-Aware", "Risk-Scored",
    "Side-by-Side",
)
_TITLE_ACTIVITIES = (
    "Alert Triage", "Case Summarization", "Knowledge Retrieval",
    "Report Drafting", "Anomaly Review", "Workflow Routing",
    "Escalation Handling", "Data Reconciliation", "Quality Screening",
    "Exception Handling", "Evidence Correlation", "Intake Classification",
    "Pattern Surfacing", "Backlog Prioritization", "Record Annotation",
    "Handoff Preparation", "Coverage Analysis", "Trend Monitoring",
    "Session Debriefing", "Control Verification", "Document Verification",
    "Control Testing", "Source Reconciliation", "Findings Drafting",
    "Access Review", "Incident Debriefing", "Queue Balancing",
    "Threshold Tuning",
)
_TITLE_SCOPES = (
    "for Frontline Teams", "Across Business Units", "with Oversight Controls",
    "under Peak Load", "for High-Risk Items", "in Legacy Environments",
    "with Human Sign-Off", "Against Deadline Pressure", "for New Staff",
    "Across Regions", "with Full Audit Trails", "During Surge Events",
    "for Specialist Review", "with Tier-One Support", "in Shared Queues",
    "for Recurring Filings", "in Regulated Workflows", "for Quarter-End Close",
    "with Dual Review", "for Vendor Handoffs", "Across Product Lines",
    "in High-Volume Queues",
)

_ACTOR_PHRASES = (
    "Operations analysts", "Case investigators", "Frontline specialists",
    "Review staff", "Team supervisors", "Intake coordinators",
    "Platform operators", "Duty officers",
)
_ACTIVITY_PHRASES = (
    "rank incoming work by urgency", "assemble supporting evidence",
    "draft first-pass summaries", "cross-check records between systems",
    "surface related prior cases", "prepare handoffs for the next shift",
    "classify requests against policy", "flag gaps in required documentation",
)
_OUTCOME_PHRASES = (
    "decisions land sooner without skipping review",
    "the backlog shrinks during peak periods",
    "fewer items are escalated with missing context",
    "staff spend their time on judgment instead of collation",
    "every action keeps a reviewable trail",
    "coverage stays consistent across shifts",
)

_ROLE_POOL = (
    "Operations analyst", "Case investigator", "Shift supervisor",
    "Intake coordinator", "Platform engineer", "Compliance reviewer",
    "Duty officer", "Quality auditor",
)
_CHARACTERISTIC_POOL = (
    "works across several internal systems daily",
    "handles high volumes under deadline pressure",
    "senior escalation point for ambiguous items",
    "newly onboarded and still learning procedures",
    "responsible for second-line review decisions",
    "coordinates handoffs between shifts",
)
_INDIRECT_ROLE_POOL = (
    "Customers with active accounts", "Downstream review teams",
    "Regulators examining outcomes", "Branch staff relaying guidance",
    "Counterparty institutions", "Internal audit",
)
_INDIRECT_CHARACTERISTIC_POOL = (
    "affected by decision quality and turnaround",
    "consume the outputs in their own workflows",
    "examine the process after the fact",
    "depend on accurate and timely answers",
)
_OUTCOME_ITEMS = (
    "Shorter turnaround from intake to decision",
    "Consistent handling of similar items across staff",
    "Complete supporting context attached to every decision",
    "Earlier detection of items needing specialist attention",
    "Reduced manual rekeying between systems",
)
_BENEFIT_ITEMS = (
    "Staff capacity shifts from collation to judgment",
    "Fewer missed deadlines during volume spikes",
    "Lower rework rates on returned items",
    "Smoother onboarding for new team members",
    "Clearer audit trail from source data to decision",
)
_RISK_TEXTS = (
    "Confidently wrong output enters the record without verification",
    "Staff defer to suggestions even when context contradicts them",
    "Sensitive case details leak through prompts or logs",
    "Generated text quietly drops caveats present in the source material",
    "Adversarial inputs steer the system toward unsafe actions",
    "Output quality degrades silently when upstream data drifts",
)
_KPI_ITEMS = (
    "Median handling time per item",
    "Rework rate on completed items",
    "Share of outputs corrected by human reviewers",
    "Backlog age distribution week over week",
    "Sampled accuracy score from quality audits",
    "Escalation rate to specialist teams",
)

_NARRATIVE_OPENERS = (
    "It is a busy {period} and the team is working through a queue that grew "
    "overnight",
    "A {period} surge has filled the intake queue faster than the team can "
    "clear it",
    "Midway through the {period}, a batch of unusual items arrives in the "
    "shared queue",
)
_PERIODS = ("Monday morning", "quarter-end week", "month-end close",
            "holiday coverage shift", "audit-preparation week")
_NARRATIVE_MIDDLES = (
    "The assistant drafts a working summary for each item, linking the "
    "records it drew from, while the assigned reviewer checks the draft "
    "against source systems before anything moves forward",
    "Each suggestion arrives with the evidence that produced it, and staff "
    "accept, edit, or discard suggestions item by item as volume allows",
    "The system groups related items and proposes an order of attack, and "
    "the supervisor redistributes work based on what it surfaces",
)
_NARRATIVE_COMPLICATIONS = (
    "One item contains contradictory details across systems, and the "
    "assistant's confident summary glosses over the contradiction until a "
    "reviewer notices the mismatch",
    "A newly onboarded specialist leans on the drafts heavily, approving two "
    "in a row before the supervisor reminds them to verify the cited records",
    "Halfway through the shift an upstream feed starts returning stale data, "
    "and the drafts begin citing records that no longer match reality",
)
_NARRATIVE_CLOSERS = (
    "By the end of the shift the queue is back under control, and the team "
    "lead exports the full trail of drafts, edits, and approvals for review",
    "The team clears the backlog ahead of the deadline, with every accepted "
    "draft carrying the name of the person who verified it",
    "The incident is written up from the recorded trail, which shows exactly "
    "which suggestions were accepted, corrected, or thrown out",
)
_OBJECTIVE_PROBES = (
    "whether fabricated or stale details can pass a hurried review and reach "
    "the permanent record",
    "whether the system can be steered by crafted inputs into surfacing or "
    "acting on content it should withhold",
    "how far staff reliance on the drafts degrades their own verification "
    "behavior under time pressure",
    "whether sensitive details from one case can surface in output for "
    "another",
)
_OBJECTIVE_MEASURES = (
    "Track how often planted defects survive the human checkpoint and how "
    "long they take to surface",
    "Record the conditions under which reviewers stop consulting source "
    "systems",
    "Measure detection time for injected inconsistencies across severity "
    "levels",
)


def _rng_for(prompt: str, seed: int | None, salt: str = "") -> random.Random:
    digest = hashlib.sha256(
        f"{seed}\x00{salt}\x00{prompt}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class MockBackend:
    """Deterministic stand-in for a text-generation model.

    Reads its inputs (count, use case name, scenario title, permitted
    category ids) from marker lines in the rendered prompt — the shipped
    templates contain all of them — and hashes (prompt, seed) into word
    pools. Same prompt and seed always yield byte-identical output.

    ``force_duplicate_title_once`` is a test-harness knob: the first stage-1
    completion duplicates its first title onto the second item, then the
    flag clears. Instances with the knob set are deliberately not pure.
    """

    def __init__(self, force_duplicate_title_once: bool = False):
        self._force_duplicate_title_once = force_duplicate_title_once

    def complete(self, request: GenerationRequest) -> str:
        if request.stage is Stage.STAGE1:
            return self._stage1(request)
        if request.stage is Stage.STAGE2:
            return self._stage2(request)
        return self._stage3(request)

    # -- stage 1 ---------------------------------------------------------

    def _stage1(self, request: GenerationRequest) -> str:
        prompt = request.rendered_prompt
        rng = _rng_for(prompt, request.seed, "stage1")
        m = _COUNT_MARKER.search(prompt)
        count = int(m.group(1)) if m else 3
        titles: list[str] = []
        seen: set[str] = set()
        while len(titles) < count:
            title = (f"{rng.choice(_TITLE_LEADS)} "
                     f"{rng.choice(_TITLE_ACTIVITIES)} "
                     f"{rng.choice(_TITLE_SCOPES)}")
            if title.casefold() in seen:
                continue
            seen.add(title.casefold())
            titles.append(title)
        pairs = []
        for title in titles:
            description = (f"{rng.choice(_ACTOR_PHRASES)} use the assistant to "
                           f"{rng.choice(_ACTIVITY_PHRASES)} so that "
                           f"{rng.choice(_OUTCOME_PHRASES)}.")
            pairs.append((title, description))
        if self._force_duplicate_title_once and len(pairs) >= 2:
            self._force_duplicate_title_once = False
            pairs[1] = (pairs[0][0], pairs[1][1])
        return format_stage1(pairs)

    # -- stage 2 ---------------------------------------------------------

    def _stage2(self, request: GenerationRequest) -> str:
        prompt = request.rendered_prompt
        rng = _rng_for(prompt, request.seed, "stage2")
        category_ids = _CATEGORY_MARKER.findall(prompt) or list(_FALLBACK_CATEGORY_IDS)
        direct = [
            UserDescriptor(role, rng.choice(_CHARACTERISTIC_POOL))
            for role in rng.sample(_ROLE_POOL, 2)
        ]
        indirect = [
            UserDescriptor(role, rng.choice(_INDIRECT_CHARACTERISTIC_POOL))
            for role in rng.sample(_INDIRECT_ROLE_POOL, 2)
        ]
        outcomes = rng.sample(_OUTCOME_ITEMS, 2)
        benefits = rng.sample(_BENEFIT_ITEMS, 2)
        n_risks = min(rng.randint(2, 4), len(category_ids))
        risk_categories = rng.sample(sorted(category_ids), n_risks)
        risks = [
            TaggedRisk(text=rng.choice(_RISK_TEXTS), category_id=cat)
            for cat in risk_categories
        ]
        kpis = rng.sample(_KPI_ITEMS, 3)
        return format_elements(direct, indirect, outcomes, benefits, risks, kpis)

    # -- stage 3 ---------------------------------------------------------

    def _stage3(self, request: GenerationRequest) -> str:
        prompt = request.rendered_prompt
        rng = _rng_for(prompt, request.seed, "stage3")
        title_m = _TITLE_MARKER.search(prompt)
        title = title_m.group(1).strip() if title_m else "the scenario"
        period = rng.choice(_PERIODS)
        narrative = " ".join([
            rng.choice(_NARRATIVE_OPENERS).format(period=period) + ".",
            f"The workflow in play is {title.lower()}, run the way the team "
            f"actually runs it, with the assistant embedded in the normal "
            f"queue rather than off to the side.",
            rng.choice(_NARRATIVE_MIDDLES) + ".",
            rng.choice(_NARRATIVE_COMPLICATIONS) + ".",
            rng.choice(_NARRATIVE_CLOSERS) + ".",
        ])
        objective = (
            f"Evaluators should probe {rng.choice(_OBJECTIVE_PROBES)}. "
            f"{rng.choice(_OBJECTIVE_MEASURES)}, and note any point where "
            f"the human checkpoint failed to catch an introduced defect.")
        return format_stage3(narrative, objective)


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------

class HttpBackend:
    """Posts prompts to a configured HTTP endpoint.

    Request body: {"prompt": ..., "stage": ..., "seed": ...}. The response is
    either JSON {"text": ...} or a plain text body. Auth goes in a bearer
    header read from the environment variable named in config, never from
    code.
    """

    def __init__(self, endpoint: str, timeout_s: float = 30.0,
                 max_retries: int = 2, auth_token_env: str | None = None,
                 max_concurrency: int = 4,
                 session: requests.Session | None = None):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.auth_token_env = auth_token_env
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max(1, max_concurrency))

    def complete(self, request: GenerationRequest) -> str:
        import os

        headers = {"Content-Type": "application/json"}
        if self.auth_token_env:
            token = os.environ.get(self.auth_token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        body = {
            "prompt": request.rendered_prompt,
            "stage": request.stage.value,
            "seed": request.seed,
        }
        try:
            with self._slots:
                response = self._session.post(
                    self.endpoint, json=body, headers=headers,
                    timeout=self.timeout_s)
        except requests.Timeout as e:
            raise BackendTimeoutError(
                f"backend timed out after {self.timeout_s}s: {self.endpoint}") from e
        except requests.ConnectionError as e:
            raise BackendUnreachableError(
                f"backend unreachable: {self.endpoint}") from e
        if response.status_code >= 400:
            raise BackendStatusError(
                f"backend returned status {response.status_code}",
                status_code=response.status_code)
        try:
            payload = response.json()
        except ValueError:
            return response.text
        if isinstance(payload, dict) and isinstance(payload.get("text"), str):
            return payload["text"]
        return response.text


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

class BackendRegistry:
    """Maps backend ids to backends and runs requests with retry on
    transient failures."""

    def __init__(self):
        self._backends: dict[str, Backend] = {}

    def register(self, backend_id: str, backend: Backend) -> None:
        self._backends[backend_id] = backend

    def get(self, backend_id: str) -> Backend:
        backend = self._backends.get(backend_id)
        if backend is None:
            raise UnknownBackendError(
                f"unknown backend '{backend_id}' "
                f"(registered: {sorted(self._backends) or 'none'})")
        return backend

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._backends))

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        backend = self.get(request.backend_id)
        retries = getattr(backend, "max_retries", 0)
        started = time.monotonic()
        attempt = 0
        while True:
            attempt += 1
            try:
                raw_text = backend.complete(request)
                break
            except BackendStatusError as e:
                if not e.retryable or attempt > retries:
                    raise
            except (BackendUnreachableError, BackendTimeoutError):
                if attempt > retries:
                    raise
        return GenerationResponse(
            raw_text=raw_text,
            backend_id=request.backend_id,
            latency_s=time.monotonic() - started,
            fingerprint=request_fingerprint(
                request.rendered_prompt, request.backend_id, request.seed),
        )


def default_registry() -> BackendRegistry:
    registry = BackendRegistry()
    registry.register(MOCK_BACKEND_ID, MockBackend())
    return registry


def load_backend_config(path: str | Path) -> BackendRegistry:
    """Build a registry from a config file.

    Format: {"backends": [{"backend_id", "kind": "mock"|"http", "endpoint",
    "timeout_s", "max_retries", "auth_token_env"}]}.
    """
    path = Path(path)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid backend config: {e.msg}",
                         line=e.lineno, column=e.colno) from e
    registry = BackendRegistry()
    entries = config.get("backends", [])
    if not isinstance(entries, list):
        raise ParseError("backend config 'backends' must be a list", path="$.backends")
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "backend_id" not in entry:
            raise ParseError("backend entries need a 'backend_id'",
                             path=f"$.backends[{i}]")
        kind = entry.get("kind", "mock")
        if kind == "mock":
            registry.register(entry["backend_id"], MockBackend())
        elif kind == "http":
            if not entry.get("endpoint"):
                raise ParseError("http backends need an 'endpoint'",
                                 path=f"$.backends[{i}].endpoint")
            registry.register(entry["backend_id"], HttpBackend(
                endpoint=entry["endpoint"],
                timeout_s=float(entry.get("timeout_s", 30.0)),
                max_retries=int(entry.get("max_retries", 2)),
                auth_token_env=entry.get("auth_token_env"),
                max_concurrency=int(entry.get("max_concurrency", 4)),
            ))
        else:
            raise ParseError(f"unknown backend kind {kind!r}",
                             path=f"$.backends[{i}].kind")
    if not registry.ids():
        registry.register(MOCK_BACKEND_ID, MockBackend())
    return registry
