"""Pipeline engine: stage-ordered expansion with mandatory human review gates.

Every operation either passes its preconditions and commits through the
store's single write path, or raises before touching anything — a rejected
operation leaves the store byte-identical. Content changes always append a
revision record, so the history of generated and human-edited content is
fully reconstructable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from scenarioforge.backends import BackendRegistry, GenerationRequest, default_registry
from scenarioforge.errors import (
    BackendError,
    GenerationFailedError,
    MalformedOutputError,
    ReviewStateError,
    StageOrderError,
    UnknownDocumentError,
    ValidationRefused,
)
from scenarioforge.jobs import ExpansionJob, JobStatus
from scenarioforge.parsing import (
    Stage2Elements,
    parse_stage1,
    parse_stage2,
    parse_stage3,
    render_scenario_elements,
)
from scenarioforge.prompts import PromptTemplate, load_templates, render_prompt
from scenarioforge.rubric import RubricAssessment
from scenarioforge.schema import (
    Finding,
    utc_now,
    RevisionOrigin,
    RevisionRecord,
    ReviewDecision,
    ReviewVerdict,
    Scenario,
    Stage,
    StageState,
    UseCaseWorksheet,
    apply_stage_payload,
    is_legal_transition,
    validate_stage_payload,
    validate_worksheet,
)
from scenarioforge.store import Store
from scenarioforge.taxonomy import RiskTaxonomy, load_taxonomy


@dataclass(frozen=True)
class PipelineConfig:
    # ~107 scenarios over 6 use cases, evenly: ceil(107 / 6)
    default_target_count: int = 18
    max_retries: int = 3
    default_backend_id: str = "mock"
    base_seed: int = 0


@dataclass(frozen=True)
class ExpandResult:
    job: ExpansionJob
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))


@dataclass(frozen=True)
class StatusSummary:
    use_case_id: str
    total_scenarios: int
    per_stage: Mapping[Stage, Mapping[StageState, int]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "use_case_id": self.use_case_id,
            "total_scenarios": self.total_scenarios,
            "per_stage": {
                stage.value: {state.value: n for state, n in counts.items()}
                for stage, counts in self.per_stage.items()
            },
        }


class PipelineEngine:
    """Runs expansion and review operations against one store."""

    def __init__(self, store: Store, registry: BackendRegistry | None = None,
                 taxonomy: RiskTaxonomy | None = None,
                 config: PipelineConfig | None = None):
        self.store = store
        self.registry = registry or default_registry()
        self.taxonomy = taxonomy or load_taxonomy(store.taxonomy_path)
        self.config = config or PipelineConfig()

    # -- worksheets --------------------------------------------------------

    def save_worksheet(self, worksheet: UseCaseWorksheet,
                       actor: str = "operator") -> int:
        """Create or update a worksheet; refuses invalid content."""
        report = validate_worksheet(worksheet)
        if not report.ok:
            raise ValidationRefused("worksheet failed validation", report.findings)
        if self.store.exists(worksheet.id):
            expected = self.store.revision_of(worksheet.id)
            worksheet = dataclasses.replace(worksheet, updated_at=utc_now())
        else:
            expected = 0
        return self.store.put(worksheet, expected, actor=actor,
                              action="worksheet_saved")

    def _worksheet(self, use_case_id: str) -> UseCaseWorksheet:
        stored = self.store.get(use_case_id)
        if not isinstance(stored.doc, UseCaseWorksheet):
            raise UnknownDocumentError(f"'{use_case_id}' is not a use case")
        return stored.doc

    def _scenario(self, scenario_id: str):
        stored = self.store.get(scenario_id)
        if not isinstance(stored.doc, Scenario):
            raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
        return stored

    # -- prompt plumbing -----------------------------------------------------

    def _templates(self) -> dict[Stage, PromptTemplate]:
        return load_templates(self.store.templates_dir)

    @staticmethod
    def _impacts_text(w: UseCaseWorksheet) -> str:
        lines = ["Positive:"]
        lines.extend(f"- {item}" for item in w.positive_impacts) or None
        if not w.positive_impacts:
            lines.append("- (none reported)")
        lines.append("Negative:")
        if w.negative_impacts:
            lines.extend(f"- {item}" for item in w.negative_impacts)
        else:
            lines.append("- (none reported)")
        return "\n".join(lines)

    def _taxonomy_text(self) -> str:
        return "\n".join(f"- {c.id}: {c.name}" for c in self.taxonomy.categories)

    @staticmethod
    def _feedback_text(comments: str) -> str:
        if not comments.strip():
            return ""
        return f"Reviewer feedback to address:\n{comments.strip()}"

    def _render(self, stage: Stage, context: Mapping[str, str]) -> str:
        return render_prompt(self._templates()[stage], context)

    def _default_seed(self, s: Scenario) -> int:
        # Varies with the revision history so a second regeneration round
        # never replays the previous draft even when the prompt is identical.
        return self.config.base_seed + len(s.revisions)

    # -- generation loops ------------------------------------------------------

    def _generate_stage1_pairs(
        self, worksheet: UseCaseWorksheet, target: int, backend_id: str,
        base_seed: int, existing_titles: set[str], feedback: str = "",
    ) -> tuple[list[tuple[str, str, str]], int]:
        """Collect ``target`` schema-clean, distinctly titled pairs.

        Returns (accepted (title, description, fingerprint) triples, attempts).
        Raises GenerationFailedError when retries are exhausted.
        """
        accepted: list[tuple[str, str, str]] = []
        seen = set(existing_titles)
        attempts = 0
        last_error: Exception | None = None
        while len(accepted) < target and attempts < self.config.max_retries:
            attempts += 1
            prompt = self._render(Stage.STAGE1, {
                "use_case_name": worksheet.name,
                "sector": worksheet.sector,
                "impacts": self._impacts_text(worksheet),
                "count": str(target - len(accepted)),
                "feedback": self._feedback_text(feedback),
            })
            request = GenerationRequest(
                rendered_prompt=prompt, stage=Stage.STAGE1,
                backend_id=backend_id, seed=base_seed + attempts - 1)
            try:
                response = self.registry.generate(request)
                parsed = parse_stage1(response.raw_text)
            except MalformedOutputError as e:
                last_error = e
                continue
            for title, description in parsed.pairs:
                if len(accepted) >= target:
                    break
                key = title.casefold()
                if key in seen:
                    continue  # duplicate title: rejected, regenerated next pass
                seen.add(key)
                accepted.append((title, description, response.fingerprint))
        if len(accepted) < target:
            message = (f"needed {target} distinct titled pairs, got "
                       f"{len(accepted)} after {attempts} attempts")
            if last_error is not None:
                message += f" (last error: {last_error})"
            raise GenerationFailedError(message, attempts=attempts)
        return accepted, attempts

    def _generate_stage2(self, s: Scenario, worksheet: UseCaseWorksheet,
                         backend_id: str, base_seed: int) -> tuple[Stage2Elements, str, int]:
        attempts = 0
        last_error: Exception | None = None
        while attempts < self.config.max_retries:
            attempts += 1
            prompt = self._render(Stage.STAGE2, {
                "use_case_name": worksheet.name,
                "sector": worksheet.sector,
                "title": s.title,
                "description": s.description,
                "taxonomy_categories": self._taxonomy_text(),
                "feedback": self._feedback_text(s.feedback.get(Stage.STAGE2, "")),
            })
            request = GenerationRequest(
                rendered_prompt=prompt, stage=Stage.STAGE2,
                backend_id=backend_id, seed=base_seed + attempts - 1)
            try:
                response = self.registry.generate(request)
                elements = parse_stage2(response.raw_text, self.taxonomy)
                return elements, response.fingerprint, attempts
            except MalformedOutputError as e:
                last_error = e
        raise GenerationFailedError(
            f"stage2 output unusable after {attempts} attempts "
            f"(last error: {last_error})", attempts=attempts)

    def _generate_stage3(self, s: Scenario, worksheet: UseCaseWorksheet,
                         backend_id: str, base_seed: int) -> tuple[str, str, str, int]:
        attempts = 0
        last_error: Exception | None = None
        while attempts < self.config.max_retries:
            attempts += 1
            prompt = self._render(Stage.STAGE3, {
                "use_case_name": worksheet.name,
                "sector": worksheet.sector,
                "title": s.title,
                "description": s.description,
                "elements": render_scenario_elements(s),
                "feedback": self._feedback_text(s.feedback.get(Stage.STAGE3, "")),
            })
            request = GenerationRequest(
                rendered_prompt=prompt, stage=Stage.STAGE3,
                backend_id=backend_id, seed=base_seed + attempts - 1)
            try:
                response = self.registry.generate(request)
                narrative, objective = parse_stage3(response.raw_text)
            except MalformedOutputError as e:
                last_error = e
                continue
            if len(narrative) < len(s.description):
                last_error = MalformedOutputError(
                    "narrative shorter than the description it extends",
                    raw_text=response.raw_text)
                continue
            return narrative, objective, response.fingerprint, attempts
        raise GenerationFailedError(
            f"stage3 output unusable after {attempts} attempts "
            f"(last error: {last_error})", attempts=attempts)

    # -- scenario construction helpers ---------------------------------------

    @staticmethod
    def _advance(s: Scenario, stage: Stage, *targets: StageState) -> Scenario:
        state = s.stage_state(stage)
        for target in targets:
            if not is_legal_transition(state, target):
                raise StageOrderError(
                    f"illegal {stage.value} transition "
                    f"{state.value} -> {target.value}")
            state = target
        states = dict(s.stage_states)
        states[stage] = state
        return dataclasses.replace(s, stage_states=states)

    @staticmethod
    def _with_revision(s: Scenario, stage: Stage, payload: Mapping[str, Any],
                       origin: RevisionOrigin,
                       fingerprint: str | None) -> Scenario:
        record = RevisionRecord(
            index=s.next_revision_index(),
            stage=stage,
            payload=dict(payload),
            origin=origin,
            prompt_fingerprint=fingerprint,
        )
        return dataclasses.replace(s, revisions=(*s.revisions, record))

    @staticmethod
    def _clear_feedback(s: Scenario, stage: Stage) -> Scenario:
        if stage not in s.feedback:
            return s
        feedback = dict(s.feedback)
        feedback.pop(stage)
        return dataclasses.replace(s, feedback=feedback)

    @staticmethod
    def _elements_payload(elements: Stage2Elements) -> dict[str, Any]:
        return {
            "direct_users": [
                {"role": u.role, "characteristics": u.characteristics}
                for u in elements.direct_users],
            "indirect_users": [
                {"role": u.role, "characteristics": u.characteristics}
                for u in elements.indirect_users],
            "intended_outcomes": list(elements.intended_outcomes),
            "benefits": list(elements.benefits),
            "risks": [
                {"text": r.text, "category_id": r.category_id}
                for r in elements.risks],
            "kpis": list(elements.kpis),
        }

    # -- job bookkeeping -------------------------------------------------------

    def _start_job(self, use_case_id: str, stage: Stage, backend_id: str,
                   actor: str, target_count: int | None = None,
                   job_id: str | None = None) -> ExpansionJob:
        job = ExpansionJob(
            id=job_id or self.store.allocate_job_id(),
            use_case_id=use_case_id,
            stage=stage,
            status=JobStatus.RUNNING,
            target_count=target_count,
            backend_id=backend_id,
        )
        expected = self.store.revision_of(job.id) if self.store.exists(job.id) else 0
        self.store.put(job, expected, actor=actor, action="job_started",
                       stage=stage, detail=f"backend={backend_id}")
        return job

    def _finish_job(self, job: ExpansionJob, status: JobStatus, attempts: int,
                    scenario_ids: Sequence[str], detail: str,
                    actor: str) -> ExpansionJob:
        final = dataclasses.replace(
            job, status=status, attempts=attempts,
            scenario_ids=tuple(scenario_ids), detail=detail)
        action = "job_failed" if status is JobStatus.FAILED else "job_finished"
        self.store.put(final, self.store.revision_of(job.id), actor=actor,
                       action=action, stage=job.stage,
                       detail=f"status={status.value} attempts={attempts}")
        return final

    # -- public operations -------------------------------------------------------

    def expand_stage1(self, use_case_id: str, target_count: int | None = None,
                      backend_id: str | None = None, seed: int | None = None,
                      actor: str = "operator",
                      job_id: str | None = None) -> ExpandResult:
        """Create ``target_count`` new scenarios with titles and descriptions,
        each left pending review at stage 1."""
        target = self.config.default_target_count if target_count is None \
            else target_count
        if target < 1:
            raise ValidationRefused("target_count must be >= 1")
        worksheet = self._worksheet(use_case_id)
        report = validate_worksheet(worksheet)
        if not report.ok:
            raise ValidationRefused(
                f"use case '{use_case_id}' failed validation", report.findings)
        backend_id = backend_id or self.config.default_backend_id
        self.registry.get(backend_id)  # refuse unknown backends pre-job
        # Default seed varies with store growth so repeat runs over the same
        # use case draw fresh candidates instead of re-proposing old titles.
        if seed is None:
            seed = self.config.base_seed + self.store.count(
                "scenario", use_case_id=use_case_id)
        base_seed = seed

        job = self._start_job(use_case_id, Stage.STAGE1, backend_id, actor,
                              target_count=target, job_id=job_id)
        try:
            accepted, attempts = self._generate_stage1_pairs(
                worksheet, target, backend_id, base_seed,
                self.store.scenario_titles(use_case_id))
        except (GenerationFailedError, BackendError) as e:
            self._finish_job(job, JobStatus.FAILED,
                             getattr(e, "attempts", 0), (), str(e), actor)
            raise

        scenarios: list[Scenario] = []
        for title, description, fingerprint in accepted:
            scenario = Scenario(
                id=self.store.allocate_scenario_id(use_case_id),
                use_case_id=use_case_id,
                sector=worksheet.sector,
                title=title,
                description=description,
            )
            scenario = self._advance(scenario, Stage.STAGE1,
                                     StageState.DRAFTED,
                                     StageState.PENDING_REVIEW)
            scenario = self._with_revision(
                scenario, Stage.STAGE1,
                {"title": title, "description": description},
                RevisionOrigin.GENERATED, fingerprint)
            self.store.put(scenario, 0, actor=actor, action="scenario_created",
                           stage=Stage.STAGE1, detail=f"job={job.id}")
            scenarios.append(scenario)
        final = self._finish_job(
            job, JobStatus.AWAITING_REVIEW, attempts,
            [s.id for s in scenarios], f"created {len(scenarios)} scenarios",
            actor)
        return ExpandResult(job=final, scenarios=tuple(scenarios))

    def regenerate_stage1(self, scenario_id: str, backend_id: str | None = None,
                          seed: int | None = None,
                          actor: str = "operator") -> Scenario:
        """Redraft title/description for a scenario sent back with feedback."""
        stored = self._scenario(scenario_id)
        s = stored.doc
        if s.stage_state(Stage.STAGE1) is not StageState.CHANGES_REQUESTED:
            raise StageOrderError(
                f"stage1 of '{scenario_id}' is "
                f"{s.stage_state(Stage.STAGE1).value}, not changes_requested")
        worksheet = self._worksheet(s.use_case_id)
        backend_id = backend_id or self.config.default_backend_id
        self.registry.get(backend_id)
        base_seed = self._default_seed(s) if seed is None else seed

        job = self._start_job(s.use_case_id, Stage.STAGE1, backend_id, actor)
        try:
            accepted, attempts = self._generate_stage1_pairs(
                worksheet, 1, backend_id, base_seed,
                self.store.scenario_titles(s.use_case_id, exclude=scenario_id),
                feedback=s.feedback.get(Stage.STAGE1, ""))
        except (GenerationFailedError, BackendError) as e:
            self._finish_job(job, JobStatus.FAILED,
                             getattr(e, "attempts", 0), (), str(e), actor)
            raise
        title, description, fingerprint = accepted[0]
        updated = dataclasses.replace(s, title=title, description=description)
        updated = self._advance(updated, Stage.STAGE1, StageState.DRAFTED,
                                StageState.PENDING_REVIEW)
        updated = self._with_revision(
            updated, Stage.STAGE1, {"title": title, "description": description},
            RevisionOrigin.GENERATED, fingerprint)
        updated = self._clear_feedback(updated, Stage.STAGE1)
        self.store.put(updated, stored.revision, actor=actor,
                       action="scenario_regenerated", stage=Stage.STAGE1,
                       detail=f"job={job.id}")
        self._finish_job(job, JobStatus.AWAITING_REVIEW, attempts,
                         [scenario_id], "regenerated title/description", actor)
        return updated

    def expand_stage2(self, scenario_id: str, backend_id: str | None = None,
                      seed: int | None = None,
                      actor: str = "operator") -> Scenario:
        """Populate the six element groups for one approved scenario."""
        stored = self._scenario(scenario_id)
        s = stored.doc
        self._require_stage_ready(s, Stage.STAGE2)
        worksheet = self._worksheet(s.use_case_id)
        backend_id = backend_id or self.config.default_backend_id
        self.registry.get(backend_id)
        base_seed = self._default_seed(s) if seed is None else seed

        job = self._start_job(s.use_case_id, Stage.STAGE2, backend_id, actor)
        try:
            updated, attempts = self._apply_stage2(s, stored.revision, worksheet,
                                                   backend_id, base_seed, actor, job)
        except (GenerationFailedError, BackendError) as e:
            self._finish_job(job, JobStatus.FAILED,
                             getattr(e, "attempts", 0), (), str(e), actor)
            raise
        self._finish_job(job, JobStatus.AWAITING_REVIEW, attempts,
                         [scenario_id], "elements populated", actor)
        return updated

    def _require_stage_ready(self, s: Scenario, stage: Stage) -> None:
        prev = stage.previous
        if prev is not None and s.stage_state(prev) is not StageState.APPROVED:
            raise StageOrderError(
                f"{prev.value} of '{s.id}' is {s.stage_state(prev).value}, "
                f"not approved")
        own = s.stage_state(stage)
        if own not in (StageState.NOT_STARTED, StageState.CHANGES_REQUESTED):
            raise StageOrderError(
                f"{stage.value} of '{s.id}' is {own.value}; expansion needs "
                f"not_started or changes_requested")

    def _apply_stage2(self, s: Scenario, revision: int,
                      worksheet: UseCaseWorksheet, backend_id: str,
                      base_seed: int, actor: str,
                      job: ExpansionJob) -> tuple[Scenario, int]:
        elements, fingerprint, attempts = self._generate_stage2(
            s, worksheet, backend_id, base_seed)
        payload = self._elements_payload(elements)
        report = validate_stage_payload(Stage.STAGE2, payload, self.taxonomy)
        if not report.ok:
            raise GenerationFailedError(
                f"parsed stage2 output failed schema validation: "
                f"{[f.message for f in report.findings]}", attempts=attempts)
        updated = apply_stage_payload(s, Stage.STAGE2, payload)
        updated = self._advance(updated, Stage.STAGE2, StageState.DRAFTED,
                                StageState.PENDING_REVIEW)
        updated = self._with_revision(updated, Stage.STAGE2, payload,
                                      RevisionOrigin.GENERATED, fingerprint)
        updated = self._clear_feedback(updated, Stage.STAGE2)
        self.store.put(updated, revision, actor=actor,
                       action="scenario_expanded", stage=Stage.STAGE2,
                       detail=f"job={job.id} attempts={attempts}")
        return updated, attempts

    def expand_stage3(self, scenario_id: str, backend_id: str | None = None,
                      seed: int | None = None,
                      actor: str = "operator") -> Scenario:
        """Generate narrative and evaluation objective for one scenario."""
        stored = self._scenario(scenario_id)
        s = stored.doc
        self._require_stage_ready(s, Stage.STAGE3)
        worksheet = self._worksheet(s.use_case_id)
        backend_id = backend_id or self.config.default_backend_id
        self.registry.get(backend_id)
        base_seed = self._default_seed(s) if seed is None else seed

        job = self._start_job(s.use_case_id, Stage.STAGE3, backend_id, actor)
        try:
            updated, attempts = self._apply_stage3(s, stored.revision, worksheet,
                                                   backend_id, base_seed, actor, job)
        except (GenerationFailedError, BackendError) as e:
            self._finish_job(job, JobStatus.FAILED,
                             getattr(e, "attempts", 0), (), str(e), actor)
            raise
        self._finish_job(job, JobStatus.AWAITING_REVIEW, attempts, [scenario_id],
                         "narrative and objective populated", actor)
        return updated

    def _apply_stage3(self, s: Scenario, revision: int,
                      worksheet: UseCaseWorksheet, backend_id: str,
                      base_seed: int, actor: str,
                      job: ExpansionJob) -> tuple[Scenario, int]:
        narrative, objective, fingerprint, attempts = self._generate_stage3(
            s, worksheet, backend_id, base_seed)
        payload = {"narrative": narrative, "evaluation_objective": objective}
        updated = apply_stage_payload(s, Stage.STAGE3, payload)
        updated = self._advance(updated, Stage.STAGE3, StageState.DRAFTED,
                                StageState.PENDING_REVIEW)
        updated = self._with_revision(updated, Stage.STAGE3, payload,
                                      RevisionOrigin.GENERATED, fingerprint)
        updated = self._clear_feedback(updated, Stage.STAGE3)
        self.store.put(updated, revision, actor=actor,
                       action="scenario_expanded", stage=Stage.STAGE3,
                       detail=f"job={job.id} attempts={attempts}")
        return updated, attempts

    # -- batch expansion ---------------------------------------------------------

    def eligible_scenario_ids(self, use_case_id: str, stage: Stage) -> list[str]:
        """Scenarios an ``expand --stage N`` run would operate on."""
        out = []
        for stored in self.store.iter_docs("scenario", use_case_id=use_case_id):
            s = stored.doc
            if stage is Stage.STAGE1:
                if s.stage_state(Stage.STAGE1) is StageState.CHANGES_REQUESTED:
                    out.append(s.id)
                continue
            prev_ok = s.stage_state(stage.previous) is StageState.APPROVED
            own_ok = s.stage_state(stage) in (
                StageState.NOT_STARTED, StageState.CHANGES_REQUESTED)
            if prev_ok and own_ok:
                out.append(s.id)
        return out

    def expand_batch(self, use_case_id: str, stage: Stage,
                     backend_id: str | None = None, seed: int | None = None,
                     actor: str = "operator",
                     job_id: str | None = None) -> ExpandResult:
        """Run one stage over every eligible scenario of a use case.

        For stage 1 this regenerates scenarios sent back with feedback (new
        scenarios come from expand_stage1 with a count). One job covers the
        whole batch; per-scenario generation failures are recorded and do not
        stop the rest.
        """
        worksheet = self._worksheet(use_case_id)
        backend_id = backend_id or self.config.default_backend_id
        self.registry.get(backend_id)
        eligible = self.eligible_scenario_ids(use_case_id, stage)
        if not eligible:
            raise StageOrderError(
                f"no eligible scenarios for {stage.value} in '{use_case_id}'"
                + ("" if stage is Stage.STAGE1 else
                   f" ({stage.previous.value} must be approved first)"))

        job = self._start_job(use_case_id, stage, backend_id, actor,
                              job_id=job_id)
        updated: list[Scenario] = []
        failures: list[str] = []
        max_attempts = 0
        for scenario_id in eligible:
            stored = self._scenario(scenario_id)
            s = stored.doc
            base_seed = self._default_seed(s) if seed is None else seed
            try:
                if stage is Stage.STAGE1:
                    accepted, attempts = self._generate_stage1_pairs(
                        worksheet, 1, backend_id, base_seed,
                        self.store.scenario_titles(use_case_id,
                                                   exclude=scenario_id),
                        feedback=s.feedback.get(Stage.STAGE1, ""))
                    title, description, fingerprint = accepted[0]
                    regenerated = dataclasses.replace(
                        s, title=title, description=description)
                    regenerated = self._advance(
                        regenerated, Stage.STAGE1, StageState.DRAFTED,
                        StageState.PENDING_REVIEW)
                    regenerated = self._with_revision(
                        regenerated, Stage.STAGE1,
                        {"title": title, "description": description},
                        RevisionOrigin.GENERATED, fingerprint)
                    regenerated = self._clear_feedback(regenerated, Stage.STAGE1)
                    self.store.put(regenerated, stored.revision, actor=actor,
                                   action="scenario_regenerated",
                                   stage=Stage.STAGE1, detail=f"job={job.id}")
                    updated.append(regenerated)
                elif stage is Stage.STAGE2:
                    expanded, attempts = self._apply_stage2(
                        s, stored.revision, worksheet, backend_id, base_seed,
                        actor, job)
                    updated.append(expanded)
                else:
                    expanded, attempts = self._apply_stage3(
                        s, stored.revision, worksheet, backend_id, base_seed,
                        actor, job)
                    updated.append(expanded)
                max_attempts = max(max_attempts, attempts)
            except (GenerationFailedError, BackendError) as e:
                failures.append(f"{scenario_id}: {e}")
                max_attempts = max(max_attempts, getattr(e, "attempts", 1))
        if failures:
            status = JobStatus.FAILED
            detail = f"{len(failures)} scenario(s) failed: " + "; ".join(failures)
        else:
            status = JobStatus.AWAITING_REVIEW
            detail = f"expanded {len(updated)} scenario(s)"
        final = self._finish_job(job, status, max_attempts,
                                 [s.id for s in updated], detail, actor)
        return ExpandResult(job=final, scenarios=tuple(updated))

    # -- review ---------------------------------------------------------------

    def submit_review(self, decision: ReviewDecision) -> Scenario:
        """Apply a human checkpoint decision; exactly one store write."""
        stored = self._scenario(decision.scenario_id)
        s = stored.doc
        if s.stage_state(decision.stage) is not StageState.PENDING_REVIEW:
            raise ReviewStateError(
                f"{decision.stage.value} of '{s.id}' is "
                f"{s.stage_state(decision.stage).value}, not pending_review")
        needs_payload = decision.verdict is ReviewVerdict.EDIT_AND_APPROVE
        if needs_payload and decision.edited_payload is None:
            raise ValidationRefused(
                "edit_and_approve requires an edited_payload",
                [Finding("edited_payload", "missing_field",
                         "edited_payload is required for edit_and_approve")])
        if not needs_payload and decision.edited_payload is not None:
            raise ValidationRefused(
                f"{decision.verdict.value} must not carry an edited_payload",
                [Finding("edited_payload", "unexpected_field",
                         "edited_payload is only valid for edit_and_approve")])

        if decision.verdict is ReviewVerdict.APPROVE:
            updated = self._advance(s, decision.stage, StageState.APPROVED)
        elif decision.verdict is ReviewVerdict.EDIT_AND_APPROVE:
            payload = dict(decision.edited_payload or {})
            report = validate_stage_payload(decision.stage, payload, self.taxonomy)
            findings = list(report.findings)
            if decision.stage is Stage.STAGE1 and not findings:
                title = str(payload["title"]).casefold()
                if title in self.store.scenario_titles(s.use_case_id, exclude=s.id):
                    findings.append(Finding(
                        "title", "duplicate_title",
                        "another scenario in this use case already has "
                        "this title"))
            if findings:
                raise ValidationRefused("edited payload failed validation",
                                        findings)
            updated = apply_stage_payload(s, decision.stage, payload)
            updated = self._with_revision(updated, decision.stage, payload,
                                          RevisionOrigin.HUMAN_EDITED, None)
            updated = self._advance(updated, decision.stage, StageState.APPROVED)
        elif decision.verdict is ReviewVerdict.REQUEST_REGENERATION:
            updated = self._advance(s, decision.stage,
                                    StageState.CHANGES_REQUESTED)
            feedback = dict(updated.feedback)
            feedback[decision.stage] = decision.comments
            updated = dataclasses.replace(updated, feedback=feedback)
        elif decision.verdict is ReviewVerdict.REJECT:
            updated = self._advance(s, decision.stage, StageState.REJECTED)
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unhandled verdict {decision.verdict!r}")

        detail = f"verdict={decision.verdict.value}"
        if decision.comments:
            detail += f" comments={decision.comments!r}"
        self.store.put(updated, stored.revision, actor=decision.reviewer,
                       action="review_submitted", stage=decision.stage,
                       detail=detail)
        return updated

    # -- status / assessments ----------------------------------------------------

    def pipeline_status(self, use_case_id: str) -> StatusSummary:
        """Per-stage counts of scenarios in each state, recomputed from docs."""
        self._worksheet(use_case_id)  # raises on unknown use case
        per_stage: dict[Stage, dict[StageState, int]] = {
            stage: {state: 0 for state in StageState} for stage in Stage.ordered()}
        total = 0
        for stored in self.store.iter_docs("scenario", use_case_id=use_case_id):
            total += 1
            for stage in Stage.ordered():
                per_stage[stage][stored.doc.stage_state(stage)] += 1
        return StatusSummary(use_case_id=use_case_id, total_scenarios=total,
                             per_stage=per_stage)

    def record_assessment(self, assessment: RubricAssessment,
                          actor: str | None = None) -> int:
        """Persist an assessment append-only (new id per assessment)."""
        return self.store.put(
            assessment, 0, actor=actor or assessment.assessed_by,
            action="assessment_recorded",
            detail=f"scenario={assessment.scenario_id} "
                   f"verdict={assessment.verdict.value}")


def effective_job_status(store: Store, job: ExpansionJob) -> JobStatus:
    """Current truth for a job: an awaiting-review job whose scenarios have
    all been decided at its stage reads as completed."""
    if job.status is not JobStatus.AWAITING_REVIEW or not job.scenario_ids:
        return job.status
    for scenario_id in job.scenario_ids:
        try:
            stored = store.get(scenario_id)
        except UnknownDocumentError:
            continue
        if stored.doc.stage_state(job.stage) is StageState.PENDING_REVIEW:
            return JobStatus.AWAITING_REVIEW
    return JobStatus.COMPLETED


# ---------------------------------------------------------------------------
# Revision diffs
# ---------------------------------------------------------------------------

def diff_revisions(s: Scenario, from_index: int, to_index: int) -> dict[str, Any]:
    """Field-level structured diff between two revision payloads."""
    by_index = {rev.index: rev for rev in s.revisions}
    for idx in (from_index, to_index):
        if idx not in by_index:
            raise UnknownDocumentError(
                f"scenario '{s.id}' has no revision {idx}")
    older = by_index[from_index].payload
    newer = by_index[to_index].payload
    changes = []
    for field_name in sorted(set(older) | set(newer)):
        before = older.get(field_name)
        after = newer.get(field_name)
        if before != after:
            changes.append({"field": field_name, "from": before, "to": after})
    return {
        "scenario_id": s.id,
        "from_index": from_index,
        "to_index": to_index,
        "from_stage": by_index[from_index].stage.value,
        "to_stage": by_index[to_index].stage.value,
        "changes": changes,
    }
