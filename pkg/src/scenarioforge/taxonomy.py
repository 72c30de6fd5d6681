"""Risk taxonomy loading and coverage reporting.

The taxonomy is data, not code: the default file ships with the package and
any structurally valid replacement file works without code changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TYPE_CHECKING

from scenarioforge.errors import TaxonomyError

if TYPE_CHECKING:
    from scenarioforge.schema import Scenario

DEFAULT_TAXONOMY_RESOURCE = "taxonomy_nist_ai_600_1.json"


@dataclass(frozen=True)
class RiskCategory:
    id: str
    name: str
    summary: str


@dataclass(frozen=True)
class RiskTaxonomy:
    source_name: str
    version: str
    categories: tuple[RiskCategory, ...]
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "extra", dict(self.extra))

    def category_ids(self) -> frozenset[str]:
        return frozenset(c.id for c in self.categories)

    def get(self, category_id: str) -> RiskCategory | None:
        for c in self.categories:
            if c.id == category_id:
                return c
        return None


def validate_taxonomy(t: RiskTaxonomy) -> None:
    """Raise TaxonomyError on structural defects (empty list, duplicate ids)."""
    if not t.categories:
        raise TaxonomyError("empty taxonomy: at least one category is required")
    seen: dict[str, int] = {}
    for c in t.categories:
        for name, value in (("id", c.id), ("name", c.name), ("summary", c.summary)):
            if not value or not value.strip():
                raise TaxonomyError(
                    f"category {c.id or '<blank>'!r} has empty {name}")
        seen[c.id] = seen.get(c.id, 0) + 1
    duplicates = sorted(cid for cid, n in seen.items() if n > 1)
    if duplicates:
        raise TaxonomyError(f"duplicate category id(s): {', '.join(duplicates)}")


def load_taxonomy(path: str | Path) -> RiskTaxonomy:
    """Load and validate a taxonomy file."""
    from scenarioforge import canonical

    path = Path(path)
    if not path.exists():
        raise TaxonomyError(f"taxonomy file not found: {path}")
    doc = canonical.parse(path.read_bytes())
    if not isinstance(doc, RiskTaxonomy):
        raise TaxonomyError(f"{path} is not a risk_taxonomy document")
    validate_taxonomy(doc)
    return doc


def default_taxonomy() -> RiskTaxonomy:
    """The packaged default taxonomy (generative-AI risk categories)."""
    from scenarioforge import canonical

    data = resources.files("scenarioforge.data").joinpath(
        DEFAULT_TAXONOMY_RESOURCE).read_bytes()
    doc = canonical.parse(data)
    assert isinstance(doc, RiskTaxonomy)
    validate_taxonomy(doc)
    return doc


@dataclass(frozen=True)
class CoverageReport:
    """Per-category scenario counts, corpus-wide and per use case.

    ``counts[cat]`` is the number of scenarios with at least one risk tagged
    with ``cat``. Categories whose corpus-wide count falls below ``floor``
    are flagged; the default floor of 0 makes the report informational only.
    """

    total_scenarios: int
    counts: Mapping[str, int]
    per_use_case: Mapping[str, Mapping[str, int]]
    floor: int
    flagged: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_scenarios": self.total_scenarios,
            "floor": self.floor,
            "counts": dict(self.counts),
            "flagged": list(self.flagged),
            "per_use_case": {uc: dict(c) for uc, c in self.per_use_case.items()},
        }


def coverage_report(scenarios: Sequence["Scenario"], t: RiskTaxonomy,
                    floor: int = 0) -> CoverageReport:
    """Count, per category, how many scenarios tag it at least once."""
    counts = {c.id: 0 for c in t.categories}
    per_use_case: dict[str, dict[str, int]] = {}
    for s in scenarios:
        tagged = {r.category_id for r in s.risks if r.category_id in counts}
        uc_counts = per_use_case.setdefault(s.use_case_id, {c.id: 0 for c in t.categories})
        for cat in tagged:
            counts[cat] += 1
            uc_counts[cat] += 1
    flagged = tuple(c.id for c in t.categories if counts[c.id] < floor)
    return CoverageReport(
        total_scenarios=len(scenarios),
        counts=counts,
        per_use_case={uc: per_use_case[uc] for uc in sorted(per_use_case)},
        floor=floor,
        flagged=flagged,
    )
