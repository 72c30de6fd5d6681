"""Readiness rubric: automatic completeness checks plus recorded human scores.

Scoring is hybrid. Deterministic autochecks flag structural gaps per category;
humans score each category on a 1..scale_max scale. The weighted score is
computed in exact rational arithmetic so re-computation matches bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, TYPE_CHECKING

from scenarioforge.errors import ValidationRefused
from scenarioforge.schema import Finding, Scenario, utc_now

if TYPE_CHECKING:
    from scenarioforge.taxonomy import RiskTaxonomy

DEFAULT_RUBRIC_RESOURCE = "rubric_default.json"


class ReadinessVerdict(str, Enum):
    READY = "ready"
    NOT_READY = "not_ready"


@dataclass(frozen=True)
class RubricCategory:
    id: str
    name: str
    guiding_questions: tuple[str, ...]
    autochecks: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "guiding_questions", tuple(self.guiding_questions))
        object.__setattr__(self, "autochecks", tuple(self.autochecks))


@dataclass(frozen=True)
class RubricDefinition:
    categories: tuple[RubricCategory, ...]
    scale_max: int = 5
    weights: Mapping[str, float] = field(default_factory=dict)
    readiness_threshold: float = 0.7
    mandatory_autochecks: tuple[str, ...] = ()
    narrative_min_chars: int = 400
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        weights = dict(self.weights)
        for c in self.categories:
            weights.setdefault(c.id, 1.0)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "mandatory_autochecks", tuple(self.mandatory_autochecks))
        object.__setattr__(self, "extra", dict(self.extra))

    def category_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.categories)


def validate_rubric(r: RubricDefinition) -> None:
    """Raise ValidationRefused on a structurally unusable rubric."""
    findings: list[Finding] = []
    if not r.categories:
        findings.append(Finding("categories", "min_one_entry",
                                "at least one category is required"))
    if r.scale_max < 2:
        findings.append(Finding("scale_max", "min_value", "scale_max must be >= 2"))
    ids = [c.id for c in r.categories]
    if len(set(ids)) != len(ids):
        findings.append(Finding("categories", "duplicate_id",
                                "category ids must be unique"))
    for i, c in enumerate(r.categories):
        if not c.name.strip():
            findings.append(Finding(f"categories[{i}].name", "non_empty",
                                    "category name must be non-empty"))
        if not c.guiding_questions or any(not q.strip() for q in c.guiding_questions):
            findings.append(Finding(
                f"categories[{i}].guiding_questions", "min_one_entry",
                "each category needs at least one non-empty guiding question"))
    unknown_weight_keys = set(r.weights) - set(ids)
    if unknown_weight_keys:
        findings.append(Finding(
            "weights", "unknown_category",
            f"weights reference unknown categories: {sorted(unknown_weight_keys)}"))
    if any(w < 0 for w in r.weights.values()):
        findings.append(Finding("weights", "non_negative",
                                "weights must be non-negative"))
    if findings:
        raise ValidationRefused("invalid rubric definition", findings)


# ---------------------------------------------------------------------------
# Autochecks
#
# Each check inspects one structural aspect of a scenario and returns a
# finding string, or None when satisfied. The rubric file decides which
# category a check reports under; the registry just implements them.
# ---------------------------------------------------------------------------

def _check_narrative_present(s: Scenario, t: "RiskTaxonomy",
                             r: RubricDefinition) -> str | None:
    if not s.narrative or not s.narrative.strip():
        return "narrative is absent"
    return None


def _check_narrative_min_length(s: Scenario, t: "RiskTaxonomy",
                                r: RubricDefinition) -> str | None:
    length = len(s.narrative or "")
    if 0 < length < r.narrative_min_chars:
        return (f"narrative is shorter than {r.narrative_min_chars} characters "
                f"(got {length})")
    if length == 0:
        return "narrative is absent"
    return None


def _check_has_direct_users(s, t, r) -> str | None:
    return None if s.direct_users else "no direct users listed"


def _check_has_indirect_users(s, t, r) -> str | None:
    return None if s.indirect_users else "no indirect users listed"


def _check_has_benefits(s, t, r) -> str | None:
    return None if s.benefits else "no benefits listed"


def _check_has_risks(s, t, r) -> str | None:
    return None if s.risks else "no risks listed"


def _check_has_kpis(s, t, r) -> str | None:
    return None if s.kpis else "no KPIs listed"


def _check_distinct_risk_categories(s, t, r) -> str | None:
    distinct = {risk.category_id for risk in s.risks if risk.category_id in t.category_ids()}
    return None if distinct else "risks cover zero taxonomy categories"


AutoCheck = Callable[[Scenario, "RiskTaxonomy", RubricDefinition], "str | None"]

AUTOCHECKS: dict[str, AutoCheck] = {
    "narrative-present": _check_narrative_present,
    "narrative-min-length": _check_narrative_min_length,
    "has-direct-users": _check_has_direct_users,
    "has-indirect-users": _check_has_indirect_users,
    "has-benefits": _check_has_benefits,
    "has-risks": _check_has_risks,
    "has-kpis": _check_has_kpis,
    "distinct-risk-categories": _check_distinct_risk_categories,
}


def autocheck(scenario: Scenario, taxonomy: "RiskTaxonomy",
              rubric: RubricDefinition) -> dict[str, list[str]]:
    """Run every category's autochecks; returns category_id -> findings."""
    results: dict[str, list[str]] = {}
    for category in rubric.categories:
        findings: list[str] = []
        for check_id in category.autochecks:
            check = AUTOCHECKS.get(check_id)
            if check is None:
                findings.append(f"unknown autocheck id '{check_id}'")
                continue
            message = check(scenario, taxonomy, rubric)
            if message is not None:
                findings.append(message)
        results[category.id] = findings
    return results


def mandatory_autochecks_pass(scenario: Scenario, taxonomy: "RiskTaxonomy",
                              rubric: RubricDefinition) -> bool:
    for check_id in rubric.mandatory_autochecks:
        check = AUTOCHECKS.get(check_id)
        if check is None or check(scenario, taxonomy, rubric) is not None:
            return False
    return True


# ---------------------------------------------------------------------------
# Assessment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryAssessment:
    auto_findings: tuple[str, ...] = ()
    human_score: int | None = None
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "auto_findings", tuple(self.auto_findings))


@dataclass(frozen=True)
class RubricAssessment:
    id: str
    scenario_id: str
    per_category: Mapping[str, CategoryAssessment]
    weighted_score: float
    verdict: ReadinessVerdict
    assessed_by: str
    timestamp: str = ""
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "per_category", dict(self.per_category))
        if not self.timestamp:
            object.__setattr__(self, "timestamp", utc_now())
        object.__setattr__(self, "extra", dict(self.extra))


def weighted_score_fraction(scores: Mapping[str, int], weights: Mapping[str, float],
                            scale_max: int) -> Fraction:
    """Exact weighted score over the scored categories.

    Computes sum(w_c * score_c) / (scale_max * sum(w_c)) with w taken only
    from categories present in ``scores``. An all-zero weight sum yields 0.
    """
    numer = Fraction(0)
    denom_weights = Fraction(0)
    for cat, score in scores.items():
        w = Fraction(weights.get(cat, 1.0))
        numer += w * score
        denom_weights += w
    if denom_weights == 0:
        return Fraction(0)
    return numer / (scale_max * denom_weights)


def assess(scenario: Scenario, rubric: RubricDefinition,
           human_scores: Mapping[str, int], *, taxonomy: "RiskTaxonomy",
           assessed_by: str = "anonymous",
           notes: Mapping[str, str] | None = None,
           assessment_id: str = "") -> RubricAssessment:
    """Combine autocheck findings and human scores into a readiness verdict.

    Ready requires: weighted score at or above the threshold, every mandatory
    autocheck passing, and every category scored.
    """
    notes = notes or {}
    category_ids = rubric.category_ids()
    findings: list[Finding] = []
    for cat in human_scores:
        if cat not in category_ids:
            findings.append(Finding(
                f"scores.{cat}", "unknown_category",
                f"'{cat}' is not a rubric category"))
    for cat, score in human_scores.items():
        if not isinstance(score, int) or isinstance(score, bool) \
                or not (1 <= score <= rubric.scale_max):
            findings.append(Finding(
                f"scores.{cat}", "score_out_of_range",
                f"score must be an integer in [1, {rubric.scale_max}]"))
    if findings:
        raise ValidationRefused("invalid rubric scores", findings)

    auto = autocheck(scenario, taxonomy, rubric)
    score_frac = weighted_score_fraction(human_scores, rubric.weights, rubric.scale_max)
    all_scored = set(category_ids) <= set(human_scores)
    ready = (
        score_frac >= Fraction(rubric.readiness_threshold)
        and mandatory_autochecks_pass(scenario, taxonomy, rubric)
        and all_scored
    )
    per_category = {
        cat: CategoryAssessment(
            auto_findings=tuple(auto.get(cat, ())),
            human_score=human_scores.get(cat),
            notes=notes.get(cat, ""),
        )
        for cat in category_ids
    }
    return RubricAssessment(
        id=assessment_id or f"as-{scenario.id}-{utc_now()}",
        scenario_id=scenario.id,
        per_category=per_category,
        weighted_score=float(score_frac),
        verdict=ReadinessVerdict.READY if ready else ReadinessVerdict.NOT_READY,
        assessed_by=assessed_by,
    )


def load_rubric(path: str | Path) -> RubricDefinition:
    from scenarioforge import canonical

    doc = canonical.parse(Path(path).read_bytes())
    if not isinstance(doc, RubricDefinition):
        raise ValidationRefused(f"{path} is not a rubric_definition document")
    validate_rubric(doc)
    return doc


def default_rubric() -> RubricDefinition:
    """The packaged default rubric: eight categories with guiding questions."""
    from scenarioforge import canonical

    data = resources.files("scenarioforge.data").joinpath(
        DEFAULT_RUBRIC_RESOURCE).read_bytes()
    doc = canonical.parse(data)
    assert isinstance(doc, RubricDefinition)
    validate_rubric(doc)
    return doc
