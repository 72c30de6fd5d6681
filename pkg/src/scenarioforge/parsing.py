"""Stage output formats: canonical emitters and total parsers.

The prompts instruct the backend to emit labeled sections with one item per
line; these parsers read that format back into stage-shaped content. Parsers
never abort the process: lines that fail schema rules land in a rejects list
with the violated rule, and only structurally unusable output raises
MalformedOutputError (which the pipeline's retry loop handles).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence, TYPE_CHECKING

from scenarioforge.errors import MalformedOutputError
from scenarioforge.schema import (
    TaggedRisk,
    UserDescriptor,
    validate_description,
    validate_title,
)

if TYPE_CHECKING:
    from scenarioforge.schema import Scenario
    from scenarioforge.taxonomy import RiskTaxonomy


@dataclass(frozen=True)
class ParseReject:
    """One discarded line or item and the reason it was discarded."""

    text: str
    reason: str


# ---------------------------------------------------------------------------
# Stage 1: numbered title/description pairs
# ---------------------------------------------------------------------------

_ITEM_TITLE = re.compile(r"^\s*\d+[.)]\s*Title:\s*(.*)$", re.IGNORECASE)
_ITEM_DESCRIPTION = re.compile(r"^\s*Description:\s*(.*)$", re.IGNORECASE)


@dataclass(frozen=True)
class Stage1Parse:
    pairs: tuple[tuple[str, str], ...]
    rejects: tuple[ParseReject, ...] = ()


def format_stage1(pairs: Sequence[tuple[str, str]]) -> str:
    """Canonical stage-1 output: the exact format the prompt asks for."""
    lines = []
    for i, (title, description) in enumerate(pairs, start=1):
        lines.append(f"{i}. Title: {title}")
        lines.append(f"   Description: {description}")
    return "\n".join(lines) + "\n"


def parse_stage1(raw: str) -> Stage1Parse:
    """Extract (title, description) pairs; schema-breaking pairs go to rejects.

    Raises MalformedOutputError when no item structure is present at all.
    """
    lines = raw.splitlines()
    items: list[tuple[str, str | None]] = []
    i = 0
    while i < len(lines):
        m = _ITEM_TITLE.match(lines[i])
        if not m:
            i += 1
            continue
        title = m.group(1).strip()
        description: str | None = None
        j = i + 1
        while j < len(lines) and not _ITEM_TITLE.match(lines[j]):
            dm = _ITEM_DESCRIPTION.match(lines[j])
            if dm:
                description = dm.group(1).strip()
                break
            j += 1
        items.append((title, description))
        i = i + 1
    if not items:
        raise MalformedOutputError(
            "no title/description items found in output", raw_text=raw)

    pairs: list[tuple[str, str]] = []
    rejects: list[ParseReject] = []
    for title, description in items:
        if description is None:
            rejects.append(ParseReject(title, "item has no description line"))
            continue
        findings = validate_title(title) + validate_description(description)
        if findings:
            rejects.append(ParseReject(
                f"{title} / {description}",
                "; ".join(f.message for f in findings)))
            continue
        pairs.append((title, description))
    return Stage1Parse(pairs=tuple(pairs), rejects=tuple(rejects))


# ---------------------------------------------------------------------------
# Stage 2: six labeled element groups, one item per line
# ---------------------------------------------------------------------------

STAGE2_SECTION_HEADERS: dict[str, str] = {
    "direct_users": "Direct Users:",
    "indirect_users": "Indirect Users:",
    "intended_outcomes": "Intended Outcomes:",
    "benefits": "Benefits:",
    "risks": "Risks:",
    "kpis": "KPIs and Metrics:",
}

_BULLET = re.compile(r"^\s*[-*]\s+(.*)$")
_RISK_TAG = re.compile(r"^\[([a-z0-9-]+)\]\s*(.*)$")


@dataclass(frozen=True)
class Stage2Elements:
    direct_users: tuple[UserDescriptor, ...]
    indirect_users: tuple[UserDescriptor, ...]
    intended_outcomes: tuple[str, ...]
    benefits: tuple[str, ...]
    risks: tuple[TaggedRisk, ...]
    kpis: tuple[str, ...]
    rejects: tuple[ParseReject, ...] = ()


def format_elements(
    direct_users: Sequence[UserDescriptor],
    indirect_users: Sequence[UserDescriptor],
    intended_outcomes: Sequence[str],
    benefits: Sequence[str],
    risks: Sequence[TaggedRisk],
    kpis: Sequence[str],
) -> str:
    """Canonical stage-2 output (also reused to show elements in prompts)."""
    out: list[str] = []
    out.append(STAGE2_SECTION_HEADERS["direct_users"])
    for u in direct_users:
        out.append(f"- {u.role} | {u.characteristics}" if u.characteristics
                   else f"- {u.role}")
    out.append(STAGE2_SECTION_HEADERS["indirect_users"])
    for u in indirect_users:
        out.append(f"- {u.role} | {u.characteristics}" if u.characteristics
                   else f"- {u.role}")
    out.append(STAGE2_SECTION_HEADERS["intended_outcomes"])
    out.extend(f"- {item}" for item in intended_outcomes)
    out.append(STAGE2_SECTION_HEADERS["benefits"])
    out.extend(f"- {item}" for item in benefits)
    out.append(STAGE2_SECTION_HEADERS["risks"])
    out.extend(f"- [{r.category_id}] {r.text}" for r in risks)
    out.append(STAGE2_SECTION_HEADERS["kpis"])
    out.extend(f"- {item}" for item in kpis)
    return "\n".join(out) + "\n"


def format_stage2(elements: Stage2Elements) -> str:
    return format_elements(
        elements.direct_users, elements.indirect_users,
        elements.intended_outcomes, elements.benefits,
        elements.risks, elements.kpis)


def _split_sections(raw: str) -> dict[str, list[str]]:
    """Group bullet lines under the canonical headers, in any header order."""
    header_for_line = {
        header.lower(): key for key, header in STAGE2_SECTION_HEADERS.items()}
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in raw.splitlines():
        stripped = line.strip()
        key = header_for_line.get(stripped.lower())
        if key is not None:
            current = key
            sections.setdefault(current, [])
            continue
        if current is None:
            continue
        m = _BULLET.match(line)
        if m and m.group(1).strip():
            sections[current].append(m.group(1).strip())
    return sections


def _parse_user_line(line: str) -> UserDescriptor:
    role, _, characteristics = line.partition("|")
    return UserDescriptor(role=role.strip(), characteristics=characteristics.strip())


def parse_stage2(raw: str, taxonomy: "RiskTaxonomy") -> Stage2Elements:
    """Read the six element groups; risks must tag a known taxonomy category.

    A group whose header is absent, or that holds zero usable items, raises
    MalformedOutputError naming the group.
    """
    sections = _split_sections(raw)
    rejects: list[ParseReject] = []
    known_ids = taxonomy.category_ids()

    def _require(group: str) -> list[str]:
        items = sections.get(group)
        if not items:
            raise MalformedOutputError(
                f"missing or empty element group: {group}",
                raw_text=raw, missing=group)
        return items

    direct_users = tuple(_parse_user_line(x) for x in _require("direct_users"))
    indirect_users = tuple(_parse_user_line(x) for x in _require("indirect_users"))
    intended_outcomes = tuple(_require("intended_outcomes"))
    benefits = tuple(_require("benefits"))
    kpis = tuple(_require("kpis"))

    risk_lines = _require("risks")
    risks: list[TaggedRisk] = []
    for line in risk_lines:
        m = _RISK_TAG.match(line)
        if not m:
            rejects.append(ParseReject(line, "risk line has no [category-id] tag"))
            continue
        category_id, text = m.group(1), m.group(2).strip()
        if category_id not in known_ids:
            rejects.append(ParseReject(
                line, f"unknown risk category id '{category_id}'"))
            continue
        if not text:
            rejects.append(ParseReject(line, "risk line has no text after the tag"))
            continue
        risks.append(TaggedRisk(text=text, category_id=category_id))
    if not risks:
        raise MalformedOutputError(
            "missing or empty element group: risks", raw_text=raw, missing="risks")

    return Stage2Elements(
        direct_users=direct_users,
        indirect_users=indirect_users,
        intended_outcomes=intended_outcomes,
        benefits=benefits,
        risks=tuple(risks),
        kpis=kpis,
        rejects=tuple(rejects),
    )


# ---------------------------------------------------------------------------
# Stage 3: narrative + evaluation objective
# ---------------------------------------------------------------------------

_NARRATIVE_HEADER = "narrative:"
_OBJECTIVE_HEADER = "evaluation objective:"


def format_stage3(narrative: str, evaluation_objective: str) -> str:
    return (f"Narrative:\n{narrative}\n\n"
            f"Evaluation Objective:\n{evaluation_objective}\n")


def parse_stage3(raw: str) -> tuple[str, str]:
    """Split the labeled narrative and objective; both must be non-empty."""
    narrative_lines: list[str] | None = None
    objective_lines: list[str] | None = None
    current: list[str] | None = None
    for line in raw.splitlines():
        stripped = line.strip().lower()
        if stripped == _NARRATIVE_HEADER and narrative_lines is None:
            narrative_lines = []
            current = narrative_lines
            continue
        if stripped == _OBJECTIVE_HEADER and objective_lines is None:
            objective_lines = []
            current = objective_lines
            continue
        if current is not None:
            current.append(line)
    if narrative_lines is None or not "\n".join(narrative_lines).strip():
        raise MalformedOutputError(
            "missing part: narrative", raw_text=raw, missing="narrative")
    if objective_lines is None or not "\n".join(objective_lines).strip():
        raise MalformedOutputError(
            "missing part: evaluation_objective", raw_text=raw,
            missing="evaluation_objective")
    return ("\n".join(narrative_lines).strip(), "\n".join(objective_lines).strip())


def render_scenario_elements(s: "Scenario") -> str:
    """Six element groups of a scenario in the canonical text form."""
    return format_elements(
        s.direct_users, s.indirect_users, s.intended_outcomes,
        s.benefits, s.risks, s.kpis)
