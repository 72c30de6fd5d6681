"""Exporters: the three-column summary table and the full scenario document.

Exports are deterministic: identical store state yields identical bytes.
Rows are ordered by use case then title; rejected scenarios stay out of the
summary unless explicitly included.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence

from scenarioforge.errors import UnknownDocumentError
from scenarioforge.schema import Scenario, Stage, StageState, UseCaseWorksheet
from scenarioforge.store import Store
from scenarioforge.taxonomy import RiskTaxonomy

SUMMARY_COLUMNS = ("Use Case", "Scenario Title", "Scenario Description")

EXPORT_FORMATS = ("csv", "md")

# Scenario element headings in their documented order.
ELEMENT_HEADINGS = (
    "Sector",
    "Use Case",
    "Scenario Title",
    "Scenario Description",
    "Scenario Narrative",
    "Evaluation Objective",
    "Direct Users",
    "Indirect Users",
    "Intended Outcomes",
    "Positive Impacts/Benefits",
    "Negative Impacts/Risks",
    "KPIs and Metrics",
)

NOT_YET_GENERATED = "_Not yet generated._"


def _use_case_name(store: Store, use_case_id: str) -> str:
    try:
        parent = store.get(use_case_id).doc
    except UnknownDocumentError:
        return use_case_id
    return parent.name if isinstance(parent, UseCaseWorksheet) else use_case_id


def _summary_rows(store: Store, scenario_ids: Sequence[str] | None,
                  include_rejected: bool) -> list[tuple[str, str, str]]:
    if scenario_ids is None:
        ids = store.list("scenario", include_rejected=include_rejected)
    else:
        ids = list(scenario_ids)
    names: dict[str, str] = {}
    rows: list[tuple[str, str, str]] = []
    for scenario_id in ids:
        stored = store.get(scenario_id)
        if not isinstance(stored.doc, Scenario):
            raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
        s = stored.doc
        if s.is_rejected and not include_rejected:
            continue
        if s.use_case_id not in names:
            names[s.use_case_id] = _use_case_name(store, s.use_case_id)
        rows.append((names[s.use_case_id], s.title, s.description))
    rows.sort(key=lambda row: (row[0].casefold(), row[1].casefold(), row))
    return rows


def _escape_md_cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def export_summary(store: Store, scenario_ids: Sequence[str] | None = None,
                   format: str = "csv", include_rejected: bool = False) -> bytes:
    """Three-column summary (Use Case | Scenario Title | Scenario Description).

    ``scenario_ids=None`` exports the whole store. Unknown ids raise.
    """
    if format not in EXPORT_FORMATS:
        raise ValueError(f"unknown export format {format!r} (expected csv or md)")
    rows = _summary_rows(store, scenario_ids, include_rejected)
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\r\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
        return buffer.getvalue().encode("utf-8")
    lines = [
        "| " + " | ".join(SUMMARY_COLUMNS) + " |",
        "| " + " | ".join("---" for _ in SUMMARY_COLUMNS) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(_escape_md_cell(cell) for cell in row) + " |")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_summary_csv(data: bytes) -> list[tuple[str, str, str]]:
    """Read a summary export back into rows (header excluded)."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    rows = [tuple(row) for row in reader if row]
    if not rows or rows[0] != SUMMARY_COLUMNS:
        raise ValueError("not a summary export: header mismatch")
    return rows[1:]  # type: ignore[return-value]


def _users_block(users) -> list[str]:
    if not users:
        return [NOT_YET_GENERATED]
    out = []
    for u in users:
        line = f"- {u.role}"
        if u.characteristics:
            line += f": {u.characteristics}"
        out.append(line)
    return out


def _items_block(items) -> list[str]:
    return [f"- {item}" for item in items] if items else [NOT_YET_GENERATED]


def export_full(store: Store, scenario_id: str,
                taxonomy: RiskTaxonomy | None = None,
                include_audit: bool = True) -> bytes:
    """Human-readable document with all twelve scenario elements in order,
    plus a revision and audit appendix."""
    stored = store.get(scenario_id)
    if not isinstance(stored.doc, Scenario):
        raise UnknownDocumentError(f"'{scenario_id}' is not a scenario")
    s = stored.doc
    use_case_name = _use_case_name(store, s.use_case_id)

    def risk_line(risk) -> str:
        label = risk.category_id
        if taxonomy is not None:
            category = taxonomy.get(risk.category_id)
            if category is not None:
                label = category.name
        return f"- {risk.text} (risk category: {label})"

    lines: list[str] = [f"# {s.title}", "", f"Scenario `{s.id}` (revision {stored.revision})", ""]
    sections: list[tuple[str, list[str]]] = [
        ("Sector", [s.sector]),
        ("Use Case", [f"{use_case_name} (`{s.use_case_id}`)"]),
        ("Scenario Title", [s.title]),
        ("Scenario Description", [s.description]),
        ("Scenario Narrative",
         [s.narrative] if s.narrative else [NOT_YET_GENERATED]),
        ("Evaluation Objective",
         [s.evaluation_objective] if s.evaluation_objective else [NOT_YET_GENERATED]),
        ("Direct Users", _users_block(s.direct_users)),
        ("Indirect Users", _users_block(s.indirect_users)),
        ("Intended Outcomes", _items_block(s.intended_outcomes)),
        ("Positive Impacts/Benefits", _items_block(s.benefits)),
        ("Negative Impacts/Risks",
         [risk_line(r) for r in s.risks] if s.risks else [NOT_YET_GENERATED]),
        ("KPIs and Metrics", _items_block(s.kpis)),
    ]
    for heading, body in sections:
        lines.append(f"## {heading}")
        lines.append("")
        lines.extend(body)
        lines.append("")

    lines.append("## Revision History")
    lines.append("")
    if s.revisions:
        for rev in s.revisions:
            fingerprint = f" fingerprint={rev.prompt_fingerprint[:12]}" \
                if rev.prompt_fingerprint else ""
            lines.append(
                f"- r{rev.index} [{rev.stage.value}] {rev.origin.value} "
                f"at {rev.timestamp}{fingerprint}")
    else:
        lines.append("- none")
    lines.append("")

    lines.append("## Stage States")
    lines.append("")
    for stage in Stage.ordered():
        lines.append(f"- {stage.value}: {s.stage_state(stage).value}")
    lines.append("")

    if include_audit:
        lines.append("## Audit Trail")
        lines.append("")
        events = [e for e in store.audit_events() if e.subject_id == scenario_id]
        if events:
            for e in events:
                stage_txt = f" [{e.stage}]" if e.stage else ""
                lines.append(f"- #{e.seq} {e.timestamp} {e.actor}: "
                             f"{e.action}{stage_txt} {e.detail}".rstrip())
        else:
            lines.append("- none")
        lines.append("")
    return "\n".join(lines).encode("utf-8")
