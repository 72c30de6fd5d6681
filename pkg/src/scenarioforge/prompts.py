"""Prompt templates: placeholder contracts per stage and deterministic rendering.

Templates are plain text files on disk ({body} per stage plus a shared style
guideline file) so operators can adjust prompts without touching code. They
are re-read on every load call, which makes edits hot-reloadable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from scenarioforge.errors import PromptRenderError, TemplateError
from scenarioforge.schema import Stage

PLACEHOLDER_PATTERN = re.compile(r"\{([a-z_]+)\}")

# Values the renderer must supply for each stage; a template body must use
# all of them so the backend actually sees the inputs.
REQUIRED_PLACEHOLDERS: dict[Stage, frozenset[str]] = {
    Stage.STAGE1: frozenset({"use_case_name", "sector", "impacts", "count"}),
    Stage.STAGE2: frozenset(
        {"use_case_name", "sector", "title", "description", "taxonomy_categories"}),
    Stage.STAGE3: frozenset(
        {"use_case_name", "sector", "title", "description", "elements"}),
}

# Values a body may use but is not required to.
OPTIONAL_PLACEHOLDERS = frozenset({"style_guideline", "feedback"})

TEMPLATE_FILENAMES: dict[Stage, str] = {
    Stage.STAGE1: "stage1.txt",
    Stage.STAGE2: "stage2.txt",
    Stage.STAGE3: "stage3.txt",
}
STYLE_GUIDELINE_FILENAME = "style_guideline.txt"


@dataclass(frozen=True)
class PromptTemplate:
    stage: Stage
    style_guideline: str
    body: str

    def placeholders(self) -> frozenset[str]:
        return frozenset(PLACEHOLDER_PATTERN.findall(self.body))


def validate_template(template: PromptTemplate) -> None:
    """Enforce the placeholder contract both ways.

    The body must use every required placeholder for its stage (otherwise the
    backend never sees that input) and must not name placeholders the
    renderer will never supply (otherwise markers survive rendering).
    """
    used = template.placeholders()
    required = REQUIRED_PLACEHOLDERS[template.stage]
    missing = sorted(required - used)
    if missing:
        raise TemplateError(
            f"{template.stage.value} template body does not use required "
            f"placeholder(s): {', '.join(missing)}")
    unknown = sorted(used - required - OPTIONAL_PLACEHOLDERS)
    if unknown:
        raise TemplateError(
            f"{template.stage.value} template body names unknown "
            f"placeholder(s): {', '.join(unknown)}")


def render_prompt(template: PromptTemplate, context: Mapping[str, str]) -> str:
    """Substitute placeholders; deterministic, no markers survive.

    ``style_guideline`` is implicitly available from the template itself.
    A required name absent from ``context`` raises PromptRenderError.
    """
    values = dict(context)
    values.setdefault("style_guideline", template.style_guideline)
    values.setdefault("feedback", "")

    def _sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in REQUIRED_PLACEHOLDERS[template.stage] \
                and name not in OPTIONAL_PLACEHOLDERS:
            # Not a placeholder of this stage's contract: leave text alone.
            return match.group(0)
        if name not in values:
            raise PromptRenderError(f"missing placeholder: {name}")
        return str(values[name])

    rendered = PLACEHOLDER_PATTERN.sub(_sub, template.body)
    leftovers = [
        name for name in PLACEHOLDER_PATTERN.findall(rendered)
        if name in REQUIRED_PLACEHOLDERS[template.stage] or name in OPTIONAL_PLACEHOLDERS
    ]
    if leftovers:
        # Substituted values re-introduced placeholder markers; refuse rather
        # than ship a prompt with live markers in it.
        raise PromptRenderError(
            f"rendered prompt still contains placeholder marker(s): "
            f"{', '.join(sorted(set(leftovers)))}")
    return rendered


def load_templates(templates_dir: str | Path) -> dict[Stage, PromptTemplate]:
    """Read and validate the stage templates plus style guideline from disk."""
    templates_dir = Path(templates_dir)
    guideline_path = templates_dir / STYLE_GUIDELINE_FILENAME
    if not guideline_path.exists():
        raise TemplateError(f"style guideline file not found: {guideline_path}")
    style_guideline = guideline_path.read_text(encoding="utf-8").strip()
    templates: dict[Stage, PromptTemplate] = {}
    for stage, filename in TEMPLATE_FILENAMES.items():
        path = templates_dir / filename
        if not path.exists():
            raise TemplateError(f"template file not found: {path}")
        template = PromptTemplate(
            stage=stage,
            style_guideline=style_guideline,
            body=path.read_text(encoding="utf-8"),
        )
        validate_template(template)
        templates[stage] = template
    return templates


def default_template_files() -> dict[str, str]:
    """Packaged template file contents, keyed by filename (used by init)."""
    root = resources.files("scenarioforge.data").joinpath("templates")
    names = [STYLE_GUIDELINE_FILENAME, *TEMPLATE_FILENAMES.values()]
    return {name: root.joinpath(name).read_text(encoding="utf-8") for name in names}
