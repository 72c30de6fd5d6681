"""Store initialization: layout, default config files, and fixture use cases."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from scenarioforge import canonical
from scenarioforge.errors import ValidationRefused
from scenarioforge.prompts import default_template_files
from scenarioforge.schema import UseCaseWorksheet, validate_worksheet
from scenarioforge.store import Store

FIXTURE_RESOURCE_DIR = "fixtures"

DEFAULT_BACKENDS_CONFIG = {
    "backends": [
        {"backend_id": "mock", "kind": "mock"},
    ]
}


def fixture_worksheets() -> list[UseCaseWorksheet]:
    """The six packaged use case worksheets, validated."""
    root = resources.files("scenarioforge.data").joinpath(FIXTURE_RESOURCE_DIR)
    worksheets: list[UseCaseWorksheet] = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".json"):
            continue
        doc = canonical.parse(entry.read_bytes())
        assert isinstance(doc, UseCaseWorksheet), entry.name
        report = validate_worksheet(doc)
        if not report.ok:
            raise ValidationRefused(
                f"packaged fixture {entry.name} is invalid", report.findings)
        worksheets.append(doc)
    return worksheets


def initialize_store(root: str | Path, *, actor: str = "operator",
                     include_fixtures: bool = True,
                     durability: str = "full") -> Store:
    """Create the store layout with default taxonomy, rubric, templates,
    backend config, and (by default) the six fixture use cases.

    Returns an open writer Store. Raises if the directory already holds a
    store (re-running init must not clobber operator data).
    """
    root = Path(root)
    if (root / "audit.log").exists():
        raise FileExistsError(f"{root} already contains a store")
    store = Store(root, create=True, durability=durability)

    data = resources.files("scenarioforge.data")
    store.taxonomy_path.write_bytes(
        data.joinpath("taxonomy_nist_ai_600_1.json").read_bytes())
    store.rubric_path.write_bytes(
        data.joinpath("rubric_default.json").read_bytes())
    for name, content in default_template_files().items():
        (store.templates_dir / name).write_text(content, encoding="utf-8")
    store.backends_path.write_text(
        json.dumps(DEFAULT_BACKENDS_CONFIG, indent=2) + "\n", encoding="utf-8")

    if include_fixtures:
        for worksheet in fixture_worksheets():
            store.put(worksheet, 0, actor=actor, action="worksheet_saved",
                      detail="fixture")
    return store
