"""Operator command line: the full pipeline without the UI.

Exit codes: 0 ok, 2 validation/input, 3 stage order, 4 backend/generation,
5 conflict. Failures print one JSON line to stderr:
``{"error": {"code": ..., "message": ..., "findings": [...]}}``.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
from pathlib import Path

import click

from scenarioforge import canonical
from scenarioforge.bootstrap import initialize_store
from scenarioforge.errors import (
    BackendError,
    ConflictError,
    GenerationFailedError,
    MalformedOutputError,
    ParseError,
    PromptRenderError,
    ReviewStateError,
    ScenarioForgeError,
    StageOrderError,
    StoreLockedError,
    TaxonomyError,
    TemplateError,
    UnknownDocumentError,
    ValidationRefused,
)
from scenarioforge.exports import export_full, export_summary
from scenarioforge.backends import load_backend_config
from scenarioforge.pipeline import PipelineEngine
from scenarioforge.rubric import assess, load_rubric
from scenarioforge.schema import (
    ReviewDecision,
    ReviewVerdict,
    Scenario,
    Stage,
    UseCaseWorksheet,
    validate_scenario,
    validate_worksheet,
)
from scenarioforge.store import Store
from scenarioforge.taxonomy import coverage_report, load_taxonomy

STORE_ENV_VAR = "SCENARIOFORGE_STORE"

EXIT_VALIDATION = 2
EXIT_STAGE_ORDER = 3
EXIT_BACKEND = 4
EXIT_CONFLICT = 5

_ERROR_CODES: list[tuple[type, str, int]] = [
    (StageOrderError, "stage_order", EXIT_STAGE_ORDER),
    (ReviewStateError, "review_state", EXIT_STAGE_ORDER),
    (ConflictError, "revision_conflict", EXIT_CONFLICT),
    (StoreLockedError, "store_locked", EXIT_CONFLICT),
    (GenerationFailedError, "generation_failed", EXIT_BACKEND),
    (MalformedOutputError, "malformed_output", EXIT_BACKEND),
    (BackendError, "backend", EXIT_BACKEND),
    (ValidationRefused, "validation", EXIT_VALIDATION),
    (ParseError, "parse", EXIT_VALIDATION),
    (TaxonomyError, "taxonomy", EXIT_VALIDATION),
    (TemplateError, "template", EXIT_VALIDATION),
    (PromptRenderError, "prompt_render", EXIT_VALIDATION),
    (UnknownDocumentError, "unknown_id", EXIT_VALIDATION),
    (ScenarioForgeError, "error", EXIT_VALIDATION),
]


def _fail(e: Exception) -> None:
    code, exit_code = "error", EXIT_VALIDATION
    for cls, slug, ec in _ERROR_CODES:
        if isinstance(e, cls):
            code, exit_code = slug, ec
            break
    body = {"code": code, "message": str(e)}
    findings = getattr(e, "findings", None)
    if findings:
        body["findings"] = [dataclasses.asdict(f) for f in findings]
    click.echo(json.dumps({"error": body}, ensure_ascii=False), err=True)
    sys.exit(exit_code)


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ScenarioForgeError, FileExistsError, FileNotFoundError,
                ValueError) as e:
            _fail(e)
    return wrapper


def _store_path(ctx: click.Context) -> Path:
    path = ctx.obj.get("store")
    if path is None:
        raise ValidationRefused(
            f"no store given: pass --store DIR or set ${STORE_ENV_VAR}")
    return Path(path)


def _open_store(ctx: click.Context, *, read_only: bool = False) -> Store:
    return Store(_store_path(ctx), read_only=read_only)


def _engine(store: Store) -> PipelineEngine:
    registry = load_backend_config(store.backends_path) \
        if store.backends_path.exists() else None
    return PipelineEngine(store, registry=registry)


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2))


@click.group()
@click.option("--store", "store", envvar=STORE_ENV_VAR, default=None,
              help=f"Store directory (or ${STORE_ENV_VAR}).")
@click.pass_context
def main(ctx: click.Context, store: str | None):
    """Expand SME-elicited AI use cases into review-gated evaluation scenarios."""
    ctx.ensure_object(dict)
    ctx.obj["store"] = store


@main.command()
@click.argument("directory", type=click.Path())
@click.option("--no-fixtures", is_flag=True, default=False,
              help="Skip the six bundled example use cases.")
@click.pass_context
@_cli_errors
def init(ctx: click.Context, directory: str, no_fixtures: bool):
    """Create a new store with default taxonomy, rubric, and templates."""
    store = initialize_store(directory, include_fixtures=not no_fixtures)
    store.close()
    click.echo(f"initialized store at {directory} "
               f"({'no fixtures' if no_fixtures else '6 use cases'})")


# ---------------------------------------------------------------------------
# usecase
# ---------------------------------------------------------------------------

@main.group()
def usecase():
    """Manage use case worksheets."""


@usecase.command("add")
@click.option("--file", "file_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--actor", default="operator", show_default=True)
@click.pass_context
@_cli_errors
def usecase_add(ctx: click.Context, file_: str, actor: str):
    """Add or update a worksheet from a canonical JSON file."""
    doc = canonical.parse(Path(file_).read_bytes(), canonical.LENIENT)
    if not isinstance(doc, UseCaseWorksheet):
        raise ValidationRefused(f"{file_} is not a use_case_worksheet document")
    with _open_store(ctx) as store:
        revision = _engine(store).save_worksheet(doc, actor=actor)
    click.echo(f"saved {doc.id} (revision {revision})")


@usecase.command("show")
@click.argument("use_case_id")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def usecase_show(ctx: click.Context, use_case_id: str, as_json: bool):
    store = Store(_store_path(ctx), read_only=True)
    stored = store.get(use_case_id)
    if not isinstance(stored.doc, UseCaseWorksheet):
        raise UnknownDocumentError(f"'{use_case_id}' is not a use case")
    if as_json:
        _echo_json(canonical.doc_to_dict(stored.doc))
        return
    w = stored.doc
    click.echo(f"{w.id}: {w.name} [{w.sector}]")
    click.echo(f"  {w.summary}")
    click.echo(f"  direct users: {', '.join(u.role for u in w.direct_users)}")
    click.echo(f"  outcomes: {len(w.intended_outcomes)}  "
               f"impacts: +{len(w.positive_impacts)}/-{len(w.negative_impacts)}  "
               f"kpis: {len(w.kpis)}")


@usecase.command("list")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def usecase_list(ctx: click.Context, as_json: bool):
    store = Store(_store_path(ctx), read_only=True)
    docs = [stored.doc for stored in store.iter_docs("use_case_worksheet")]
    if as_json:
        _echo_json([canonical.doc_to_dict(doc) for doc in docs])
        return
    for doc in docs:
        n = store.count("scenario", use_case_id=doc.id)
        click.echo(f"{doc.id}\t{doc.name}\t{n} scenarios")


@usecase.command("validate")
@click.argument("use_case_id")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def usecase_validate(ctx: click.Context, use_case_id: str, as_json: bool):
    """Validate a stored worksheet; nonzero exit when findings exist."""
    store = Store(_store_path(ctx), read_only=True)
    stored = store.get(use_case_id)
    if not isinstance(stored.doc, UseCaseWorksheet):
        raise UnknownDocumentError(f"'{use_case_id}' is not a use case")
    report = validate_worksheet(stored.doc)
    if as_json:
        _echo_json(report.to_dict())
    else:
        click.echo("ok" if report.ok else
                   "\n".join(f"{f.field}: {f.message}" for f in report.findings))
    if not report.ok:
        sys.exit(EXIT_VALIDATION)


# ---------------------------------------------------------------------------
# expand / review
# ---------------------------------------------------------------------------

@main.command()
@click.option("--use-case", "use_case_id", required=True)
@click.option("--stage", type=click.IntRange(1, 3), required=True)
@click.option("--count", type=int, default=None,
              help="Stage 1 only: how many new scenarios to create.")
@click.option("--backend", "backend_id", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--actor", default="operator", show_default=True)
@click.pass_context
@_cli_errors
def expand(ctx: click.Context, use_case_id: str, stage: int,
           count: int | None, backend_id: str | None, seed: int | None,
           actor: str):
    """Run one expansion stage over a use case's eligible scenarios."""
    stage_enum = Stage.from_ordinal(stage)
    if stage != 1 and count is not None:
        raise ValidationRefused("--count only applies to --stage 1")
    with _open_store(ctx) as store:
        engine = _engine(store)
        if stage == 1 and count is not None:
            result = engine.expand_stage1(use_case_id, target_count=count,
                                          backend_id=backend_id, seed=seed,
                                          actor=actor)
        else:
            result = engine.expand_batch(use_case_id, stage_enum,
                                         backend_id=backend_id, seed=seed,
                                         actor=actor)
    click.echo(f"job {result.job.id}: {result.job.status.value} "
               f"({len(result.scenarios)} scenario(s), "
               f"attempts={result.job.attempts})")
    for s in result.scenarios:
        click.echo(f"  {s.id}\t{s.title}")


@main.group()
def review():
    """Human checkpoint queue and decisions."""


@review.command("list")
@click.option("--stage", type=click.IntRange(1, 3), default=None)
@click.option("--use-case", "use_case_id", default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def review_list(ctx: click.Context, stage: int | None, use_case_id: str | None,
                as_json: bool):
    """Pending review items, oldest first."""
    store = Store(_store_path(ctx), read_only=True)
    queue = store.pending_reviews(
        stage=Stage.from_ordinal(stage) if stage else None,
        use_case_id=use_case_id)
    for item in queue:
        item["title"] = store.get(item["scenario_id"]).doc.title
    if as_json:
        _echo_json({"pending": queue})
        return
    if not queue:
        click.echo("nothing pending")
        return
    for item in queue:
        click.echo(f"{item['scenario_id']}\t{item['stage']}\t"
                   f"{item['title']}\t(since {item['pending_since']})")


_VERDICTS = {v.value: v for v in ReviewVerdict}


@review.command("decide")
@click.option("--scenario", "scenario_id", required=True)
@click.option("--stage", type=click.IntRange(1, 3), required=True)
@click.option("--verdict", type=click.Choice(sorted(_VERDICTS)), required=True)
@click.option("--edit-file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Stage payload JSON for edit_and_approve.")
@click.option("--comments", default="")
@click.option("--reviewer", default="reviewer", show_default=True)
@click.pass_context
@_cli_errors
def review_decide(ctx: click.Context, scenario_id: str, stage: int,
                  verdict: str, edit_file: str | None, comments: str,
                  reviewer: str):
    """Apply one review decision to one scenario stage."""
    edited_payload = None
    if edit_file is not None:
        try:
            edited_payload = json.loads(Path(edit_file).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid edit file: {e.msg}",
                             line=e.lineno, column=e.colno) from e
    decision = ReviewDecision(
        reviewer=reviewer,
        scenario_id=scenario_id,
        stage=Stage.from_ordinal(stage),
        verdict=_VERDICTS[verdict],
        comments=comments,
        edited_payload=edited_payload,
    )
    with _open_store(ctx) as store:
        updated = _engine(store).submit_review(decision)
    click.echo(f"{scenario_id} stage{stage} -> "
               f"{updated.stage_state(decision.stage).value}")


# ---------------------------------------------------------------------------
# rubric / coverage / status
# ---------------------------------------------------------------------------

@main.group()
def rubric():
    """Readiness rubric scoring."""


@rubric.command("assess")
@click.option("--scenario", "scenario_id", required=True)
@click.option("--scores", "scores_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help='JSON file: {"scores": {category: int}, "notes": {...}} '
                   'or a bare {category: int} map.')
@click.option("--assessed-by", default="reviewer", show_default=True)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def rubric_assess(ctx: click.Context, scenario_id: str, scores_file: str,
                  assessed_by: str, as_json: bool):
    """Record a rubric assessment for a scenario."""
    try:
        raw = json.loads(Path(scores_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid scores file: {e.msg}",
                         line=e.lineno, column=e.colno) from e
    if isinstance(raw, dict) and "scores" in raw:
        scores, notes = raw["scores"], raw.get("notes", {})
    else:
        scores, notes = raw, {}
    with _open_store(ctx) as store:
        engine = _engine(store)
        stored = store.get(scenario_id)
        if not isinstance(stored.doc, Scenario):
            raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
        rubric_def = load_rubric(store.rubric_path)
        assessment = assess(
            stored.doc, rubric_def, scores, taxonomy=engine.taxonomy,
            assessed_by=assessed_by, notes=notes,
            assessment_id=store.allocate_assessment_id(scenario_id))
        engine.record_assessment(assessment)
    if as_json:
        _echo_json(canonical.doc_to_dict(assessment))
    else:
        click.echo(f"{assessment.id}: weighted_score="
                   f"{assessment.weighted_score:.3f} "
                   f"verdict={assessment.verdict.value}")


@main.command()
@click.option("--use-case", "use_case_id", default=None)
@click.option("--floor", type=int, default=0, show_default=True,
              help="Flag categories with fewer covering scenarios than this.")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def coverage(ctx: click.Context, use_case_id: str | None, floor: int,
             as_json: bool):
    """Risk-taxonomy coverage counts over scenarios."""
    store = Store(_store_path(ctx), read_only=True)
    taxonomy = load_taxonomy(store.taxonomy_path)
    scenarios = [stored.doc for stored in store.iter_docs(
        "scenario", use_case_id=use_case_id)]
    report = coverage_report(scenarios, taxonomy, floor=floor)
    if as_json:
        _echo_json(report.to_dict())
        return
    click.echo(f"{report.total_scenarios} scenario(s)")
    for category in taxonomy.categories:
        flag = "  <-- below floor" if category.id in report.flagged else ""
        click.echo(f"{report.counts[category.id]:4d}  {category.id}{flag}")


@main.command()
@click.option("--use-case", "use_case_id", required=True)
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def status(ctx: click.Context, use_case_id: str, as_json: bool):
    """Per-stage review-state counts for a use case."""
    store = Store(_store_path(ctx), read_only=True)
    summary = PipelineEngine(store).pipeline_status(use_case_id)
    if as_json:
        _echo_json(summary.to_dict())
        return
    click.echo(f"{use_case_id}: {summary.total_scenarios} scenario(s)")
    for stage, counts in summary.per_stage.items():
        parts = [f"{state.value}={n}" for state, n in counts.items() if n]
        click.echo(f"  {stage.value}: {' '.join(parts) if parts else '-'}")


# ---------------------------------------------------------------------------
# export / serve
# ---------------------------------------------------------------------------

@main.group()
def export():
    """Export scenario documents."""


@export.command("summary")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--format", "format_", type=click.Choice(["csv", "md"]),
              default="csv", show_default=True)
@click.option("--include-rejected", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def export_summary_cmd(ctx: click.Context, out_path: str, format_: str,
                       include_rejected: bool):
    """Three-column summary of all scenarios (Use Case | Title | Description)."""
    store = Store(_store_path(ctx), read_only=True)
    data = export_summary(store, format=format_,
                          include_rejected=include_rejected)
    Path(out_path).write_bytes(data)
    click.echo(f"wrote {out_path} ({len(data)} bytes)")


@export.command("full")
@click.option("--scenario", "scenario_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
@_cli_errors
def export_full_cmd(ctx: click.Context, scenario_id: str, out_path: str):
    """Full scenario document with all twelve elements plus history."""
    store = Store(_store_path(ctx), read_only=True)
    taxonomy = load_taxonomy(store.taxonomy_path)
    data = export_full(store, scenario_id, taxonomy=taxonomy)
    Path(out_path).write_bytes(data)
    click.echo(f"wrote {out_path} ({len(data)} bytes)")


@main.command()
@click.option("--addr", default="127.0.0.1:8714", show_default=True,
              help="host:port to bind.")
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Serve a built UI from this directory.")
@click.pass_context
@_cli_errors
def serve(ctx: click.Context, addr: str, ui_dir: str | None):
    """Start the review service (holds the store writer lock)."""
    import uvicorn

    from scenarioforge.service import create_app

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValidationRefused(f"--addr must be host:port, got {addr!r}")
    app = create_app(_store_path(ctx), ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="info")


@main.command("validate-scenario")
@click.argument("scenario_id")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
@_cli_errors
def validate_scenario_cmd(ctx: click.Context, scenario_id: str, as_json: bool):
    """Validate a stored scenario against schema, taxonomy, and its parent."""
    store = Store(_store_path(ctx), read_only=True)
    taxonomy = load_taxonomy(store.taxonomy_path)
    stored = store.get(scenario_id)
    if not isinstance(stored.doc, Scenario):
        raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
    parent = store.get(stored.doc.use_case_id).doc \
        if store.exists(stored.doc.use_case_id) else None
    known = set(store.list("use_case_worksheet"))
    report = validate_scenario(stored.doc, taxonomy, parent=parent,
                               known_use_case_ids=known)
    if as_json:
        _echo_json(report.to_dict())
    else:
        click.echo("ok" if report.ok else
                   "\n".join(f"{f.field}: {f.message}" for f in report.findings))
    if not report.ok:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
