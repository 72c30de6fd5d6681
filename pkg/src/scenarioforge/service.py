"""HTTP review service: a thin adapter over the pipeline engine and store.

Every 2xx mutation maps to exactly one pipeline operation. Optimistic
concurrency surfaces through document revisions in ETags; a stale If-Match
gets 409. Long generations run as background jobs created with 202 and
polled via their job id. Errors are structured bodies:
``{"code", "message", "findings"?}``.
"""

from __future__ import annotations

import dataclasses
import threading
from contextlib import asynccontextmanager
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from scenarioforge import canonical
from scenarioforge.backends import load_backend_config
from scenarioforge.errors import (
    BackendError,
    ConflictError,
    GenerationFailedError,
    ParseError,
    ReviewStateError,
    ScenarioForgeError,
    StageOrderError,
    UnknownBackendError,
    UnknownDocumentError,
    ValidationRefused,
)
from scenarioforge.exports import export_summary
from scenarioforge.jobs import ExpansionJob, JobStatus
from scenarioforge.pipeline import (
    PipelineEngine,
    diff_revisions,
    effective_job_status,
)
from scenarioforge.rubric import assess, load_rubric
from scenarioforge.schema import (
    ReviewDecision,
    ReviewVerdict,
    Scenario,
    Stage,
    UseCaseWorksheet,
)
from scenarioforge.store import Store
from scenarioforge.taxonomy import coverage_report


class ExpandBody(BaseModel):
    stage: int
    count: int | None = None
    backend_id: str | None = None
    seed: int | None = None


class ReviewBody(BaseModel):
    stage: int
    verdict: str
    comments: str = ""
    edited_payload: dict[str, Any] | None = None


class RubricBody(BaseModel):
    scores: dict[str, int]
    notes: dict[str, str] = {}


_STATUS_FOR: list[tuple[type, int, str]] = [
    (UnknownDocumentError, 404, "unknown_id"),
    (ReviewStateError, 409, "review_state"),
    (StageOrderError, 409, "stage_order"),
    (ConflictError, 409, "revision_conflict"),
    (ValidationRefused, 422, "validation"),
    (UnknownBackendError, 422, "unknown_backend"),
    (GenerationFailedError, 502, "generation_failed"),
    (BackendError, 502, "backend"),
    (ParseError, 400, "malformed_body"),
    (ScenarioForgeError, 400, "error"),
]


def _error_response(e: Exception) -> JSONResponse:
    status, code = 400, "error"
    for cls, st, slug in _STATUS_FOR:
        if isinstance(e, cls):
            status, code = st, slug
            break
    body: dict[str, Any] = {"code": code, "message": str(e)}
    findings = getattr(e, "findings", None)
    if findings:
        body["findings"] = [dataclasses.asdict(f) for f in findings]
    return JSONResponse(status_code=status, content=body)


def _doc_body(doc, revision: int) -> dict[str, Any]:
    return {"doc": canonical.doc_to_dict(doc), "revision": revision}


def create_app(store: Store | str | Path, *, ui_dir: str | Path | None = None,
               durability: str = "full") -> FastAPI:
    """Build the service over an open store (or a store path)."""
    if not isinstance(store, Store):
        store = Store(store, durability=durability)
    registry = load_backend_config(store.backends_path) \
        if store.backends_path.exists() else None
    engine = PipelineEngine(store, registry=registry)

    @asynccontextmanager
    async def _lifespan(app: FastAPI):
        yield
        app.state.executor.shutdown(wait=True)
        store.close()

    app = FastAPI(title="scenarioforge review service", version="0.1.0",
                  docs_url="/api/docs", openapi_url="/api/openapi.json",
                  lifespan=_lifespan)
    app.state.store = store
    app.state.engine = engine
    # Single worker: generation jobs serialize behind the store's writer path.
    app.state.executor = ThreadPoolExecutor(max_workers=1)
    app.state.idempotency_lock = threading.Lock()
    app.state.idempotency: dict[str, tuple[int, dict[str, Any]]] = {}

    @app.exception_handler(ScenarioForgeError)
    async def _on_domain_error(request: Request, exc: ScenarioForgeError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def _on_body_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "malformed_body", "message": str(exc)})

    def _stage(n: int) -> Stage:
        if n not in (1, 2, 3):
            raise ValidationRefused(f"stage must be 1, 2, or 3 (got {n})")
        return Stage.from_ordinal(n)

    def _scenario(scenario_id: str):
        stored = store.get(scenario_id)
        if not isinstance(stored.doc, Scenario):
            raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
        return stored

    def _check_if_match(if_match: str | None, revision: int) -> None:
        if if_match is None:
            return
        if if_match.strip().strip('"') != str(revision):
            raise ConflictError(
                f"stale revision: client has {if_match.strip()}, "
                f"current is {revision}", current_revision=revision)

    # -- use cases -------------------------------------------------------

    @app.get("/api/use-cases")
    def list_use_cases():
        out = []
        for stored in store.iter_docs("use_case_worksheet"):
            out.append(_doc_body(stored.doc, stored.revision))
        return {"use_cases": out}

    @app.get("/api/use-cases/{use_case_id}")
    def get_use_case(use_case_id: str, response: Response):
        stored = store.get(use_case_id)
        if not isinstance(stored.doc, UseCaseWorksheet):
            raise UnknownDocumentError(f"'{use_case_id}' is not a use case")
        response.headers["ETag"] = f'"{stored.revision}"'
        return _doc_body(stored.doc, stored.revision)

    @app.get("/api/use-cases/{use_case_id}/status")
    def use_case_status(use_case_id: str):
        return engine.pipeline_status(use_case_id).to_dict()

    # -- expansion jobs -----------------------------------------------------

    def _run_job(job_id: str, use_case_id: str, stage: Stage,
                 body: ExpandBody, actor: str) -> None:
        try:
            if stage is Stage.STAGE1 and body.count is not None:
                engine.expand_stage1(
                    use_case_id, target_count=body.count,
                    backend_id=body.backend_id, seed=body.seed,
                    actor=actor, job_id=job_id)
            else:
                engine.expand_batch(
                    use_case_id, stage, backend_id=body.backend_id,
                    seed=body.seed, actor=actor, job_id=job_id)
        except ScenarioForgeError as e:
            # Failures after queueing (generation exhausted, stale state):
            # record them on the job so polling clients see the outcome.
            try:
                stored = store.get(job_id)
                if stored.doc.status not in (JobStatus.FAILED,):
                    failed = dataclasses.replace(
                        stored.doc, status=JobStatus.FAILED, detail=str(e))
                    store.put(failed, stored.revision, actor=actor,
                              action="job_failed", stage=stage, detail=str(e))
            except ScenarioForgeError:
                pass

    @app.post("/api/use-cases/{use_case_id}/expand", status_code=202)
    def post_expand(use_case_id: str, body: ExpandBody,
                    x_reviewer: str | None = Header(default=None)):
        actor = x_reviewer or "service"
        stage = _stage(body.stage)
        if body.stage != 1 and body.count is not None:
            raise ValidationRefused("count only applies to stage 1")
        if body.count is not None and body.count < 1:
            raise ValidationRefused("target_count must be >= 1")
        engine._worksheet(use_case_id)  # 404 before queueing
        if body.backend_id is not None:
            engine.registry.get(body.backend_id)
        if not (stage is Stage.STAGE1 and body.count is not None):
            # batch run: refuse up front when nothing is eligible
            if not engine.eligible_scenario_ids(use_case_id, stage):
                raise StageOrderError(
                    f"no eligible scenarios for {stage.value} in "
                    f"'{use_case_id}'")
        # Id allocation races with concurrent posts; retry on collision.
        for _ in range(5):
            job = ExpansionJob(
                id=store.allocate_job_id(), use_case_id=use_case_id,
                stage=stage, status=JobStatus.QUEUED, target_count=body.count,
                backend_id=body.backend_id or engine.config.default_backend_id)
            try:
                store.put(job, 0, actor=actor, action="job_queued", stage=stage)
                break
            except ConflictError:
                continue
        else:
            raise ConflictError("could not allocate a job id")
        app.state.executor.submit(_run_job, job.id, use_case_id, stage, body,
                                  actor)
        return {"job_id": job.id, "status": job.status.value}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        stored = store.get(job_id)
        if not isinstance(stored.doc, ExpansionJob):
            raise UnknownDocumentError(f"'{job_id}' is not a job")
        body = _doc_body(stored.doc, stored.revision)
        body["effective_status"] = effective_job_status(store, stored.doc).value
        return body

    # -- review queue ---------------------------------------------------------

    @app.get("/api/reviews/pending")
    def pending_reviews(stage: int | None = Query(default=None),
                        use_case: str | None = Query(default=None)):
        queue = store.pending_reviews(
            stage=_stage(stage) if stage is not None else None,
            use_case_id=use_case)
        for item in queue:
            item["title"] = _scenario(item["scenario_id"]).doc.title
        return {"pending": queue}

    @app.get("/api/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str, response: Response):
        stored = _scenario(scenario_id)
        response.headers["ETag"] = f'"{stored.revision}"'
        return _doc_body(stored.doc, stored.revision)

    @app.get("/api/scenarios/{scenario_id}/diff")
    def get_diff(scenario_id: str,
                 from_index: int = Query(alias="from"),
                 to_index: int = Query(alias="to")):
        stored = _scenario(scenario_id)
        return diff_revisions(stored.doc, from_index, to_index)

    @app.post("/api/scenarios/{scenario_id}/reviews")
    def post_review(scenario_id: str, body: ReviewBody, response: Response,
                    x_reviewer: str | None = Header(default=None),
                    if_match: str | None = Header(default=None),
                    idempotency_key: str | None = Header(default=None)):
        if idempotency_key is not None:
            with app.state.idempotency_lock:
                hit = app.state.idempotency.get(idempotency_key)
            if hit is not None:
                status, payload = hit
                response.status_code = status
                return payload
        stored = _scenario(scenario_id)
        _check_if_match(if_match, stored.revision)
        try:
            verdict = ReviewVerdict(body.verdict)
        except ValueError:
            raise ValidationRefused(
                f"unknown verdict {body.verdict!r} "
                f"(expected one of {[v.value for v in ReviewVerdict]})") from None
        decision = ReviewDecision(
            reviewer=x_reviewer or "anonymous",
            scenario_id=scenario_id,
            stage=_stage(body.stage),
            verdict=verdict,
            comments=body.comments,
            edited_payload=body.edited_payload,
        )
        updated = engine.submit_review(decision)
        payload = {
            "scenario_id": scenario_id,
            "stage": decision.stage.value,
            "new_state": updated.stage_state(decision.stage).value,
            "revision": store.revision_of(scenario_id),
        }
        if idempotency_key is not None:
            with app.state.idempotency_lock:
                app.state.idempotency[idempotency_key] = (200, payload)
        return payload

    # -- rubric / coverage / export ------------------------------------------

    @app.post("/api/scenarios/{scenario_id}/rubric")
    def post_rubric(scenario_id: str, body: RubricBody,
                    x_reviewer: str | None = Header(default=None)):
        stored = _scenario(scenario_id)
        rubric_def = load_rubric(store.rubric_path)
        assessment = assess(
            stored.doc, rubric_def, body.scores, taxonomy=engine.taxonomy,
            assessed_by=x_reviewer or "anonymous", notes=body.notes,
            assessment_id=store.allocate_assessment_id(scenario_id))
        engine.record_assessment(assessment)
        return canonical.doc_to_dict(assessment)

    @app.get("/api/rubric")
    def get_rubric():
        return canonical.doc_to_dict(load_rubric(store.rubric_path))

    @app.get("/api/coverage")
    def get_coverage(use_case: str | None = Query(default=None),
                     floor: int = Query(default=0)):
        scenarios = [stored.doc for stored in store.iter_docs(
            "scenario", use_case_id=use_case)]
        return coverage_report(scenarios, engine.taxonomy, floor=floor).to_dict()

    @app.get("/api/export/summary")
    def get_export_summary(format: str = Query(default="csv"),
                           include_rejected: bool = Query(default=False)):
        if format not in ("csv", "md"):
            raise ValidationRefused(f"format must be csv or md (got {format!r})")
        data = export_summary(store, format=format,
                              include_rejected=include_rejected)
        media = "text/csv" if format == "csv" else "text/markdown"
        return Response(content=data, media_type=media)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
