"""scenarioforge: review-gated expansion of AI use cases into evaluation scenarios."""

from scenarioforge.schema import (
    ReviewDecision,
    ReviewVerdict,
    RevisionOrigin,
    RevisionRecord,
    Scenario,
    Stage,
    StageState,
    TaggedRisk,
    UseCaseWorksheet,
    UserDescriptor,
    ValidationReport,
    validate_scenario,
    validate_worksheet,
)
from scenarioforge.canonical import parse, serialize
from scenarioforge.taxonomy import RiskTaxonomy, coverage_report, default_taxonomy, load_taxonomy
from scenarioforge.rubric import RubricDefinition, assess, autocheck, default_rubric
from scenarioforge.pipeline import PipelineConfig, PipelineEngine
from scenarioforge.store import Store
from scenarioforge.bootstrap import initialize_store

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "PipelineEngine",
    "ReviewDecision",
    "ReviewVerdict",
    "RevisionOrigin",
    "RevisionRecord",
    "RiskTaxonomy",
    "RubricDefinition",
    "Scenario",
    "Stage",
    "StageState",
    "Store",
    "TaggedRisk",
    "UseCaseWorksheet",
    "UserDescriptor",
    "ValidationReport",
    "assess",
    "autocheck",
    "coverage_report",
    "default_rubric",
    "default_taxonomy",
    "initialize_store",
    "load_taxonomy",
    "parse",
    "serialize",
    "validate_scenario",
    "validate_worksheet",
    "__version__",
]
