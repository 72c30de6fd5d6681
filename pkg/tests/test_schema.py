"""Schema validation tests, anchored by independent brute-force oracles."""

import dataclasses
import random

import pytest

from scenarioforge.bootstrap import fixture_worksheets
from scenarioforge.schema import (
    RevisionOrigin,
    RevisionRecord,
    Scenario,
    Stage,
    StageState,
    TaggedRisk,
    UseCaseWorksheet,
    UserDescriptor,
    ElicitationProvenance,
    is_legal_scenario_transition,
    is_one_sentence,
    validate_scenario,
    validate_worksheet,
)

import generators


def make_worksheet(**overrides) -> UseCaseWorksheet:
    base = dict(
        id="uc-test",
        name="Test Case",
        sector="Financial Services",
        summary="A plain summary.",
        direct_users=(UserDescriptor(role="analyst"),),
        intended_outcomes=("Faster processing",),
        positive_impacts=("Less manual work",),
        negative_impacts=("Wrong output propagates",),
        kpis=("throughput",),
        provenance=ElicitationProvenance(source="sme-interview"),
    )
    base.update(overrides)
    return UseCaseWorksheet(**base)


def make_scenario(taxonomy, **overrides) -> Scenario:
    base = dict(
        id="sc-test-001",
        use_case_id="uc-test",
        sector="Financial Services",
        title="Threat Intelligence Correlation",
        description="Analysts correlate external feeds with internal alerts.",
        stage_states={Stage.STAGE1: StageState.PENDING_REVIEW},
        revisions=(RevisionRecord(
            index=0, stage=Stage.STAGE1,
            payload={"title": "Threat Intelligence Correlation",
                     "description": "Analysts correlate external feeds with "
                                    "internal alerts."},
            origin=RevisionOrigin.GENERATED, prompt_fingerprint="f" * 64),),
    )
    base.update(overrides)
    return Scenario(**base)


class TestOneSentence:
    @pytest.mark.parametrize("text,ok", [
        ("A single sentence.", True),
        ("Shouting works!", True),
        ("Is this fine?", True),
        ("", False),
        ("No terminal punctuation", False),
        ("Two sentences. Second one.", False),
        ("Interior. mark at end.", False),
        ("Trailing space after mark. ", False),
        ("Contains 2.5 decimals.", False),
        ("Mark! not at end", False),
    ])
    def test_rule(self, text, ok):
        assert is_one_sentence(text) is ok


class TestWorksheetValidation:
    def test_fixture_cyber_defense_enablement_is_clean(self):
        fixtures = {w.id: w for w in fixture_worksheets()}
        w = fixtures["uc-cyber-defense-enablement"]
        # minimal counts the shipped fixture keeps: one direct user, one
        # outcome, one KPI
        assert len(w.direct_users) == 1
        assert len(w.intended_outcomes) == 1
        assert len(w.kpis) == 1
        assert validate_worksheet(w).ok

    def test_all_fixtures_clean(self):
        assert len(fixture_worksheets()) == 6
        for w in fixture_worksheets():
            assert validate_worksheet(w).ok, w.id

    def test_empty_direct_users_single_finding(self):
        report = validate_worksheet(make_worksheet(direct_users=()))
        assert [f.field for f in report.findings] == ["direct_users"]

    def test_blank_sector_exactly_one_finding(self):
        report = validate_worksheet(make_worksheet(sector="  "))
        assert len(report.findings) == 1
        assert report.findings[0].field == "sector"

    def test_blank_entries_flagged(self):
        report = validate_worksheet(make_worksheet(kpis=("fine", " ")))
        assert report.fields() == {"kpis[1]"}

    def test_blank_user_role(self):
        report = validate_worksheet(
            make_worksheet(direct_users=(UserDescriptor(role=""),)))
        assert report.fields() == {"direct_users[0].role"}


def oracle_worksheet_violations(w: UseCaseWorksheet) -> set[str]:
    """Independent brute-force check of each worksheet invariant."""
    bad = set()
    if not w.id.strip():
        bad.add("id")
    for name in ("name", "sector", "summary"):
        if not getattr(w, name).strip():
            bad.add(name)
    if len(w.direct_users) < 1:
        bad.add("direct_users")
    for group in ("direct_users", "indirect_users"):
        for i, u in enumerate(getattr(w, group)):
            if not u.role.strip():
                bad.add(f"{group}[{i}].role")
    if len(w.intended_outcomes) < 1:
        bad.add("intended_outcomes")
    if len(w.kpis) < 1:
        bad.add("kpis")
    for group in ("sub_sectors", "intended_outcomes", "positive_impacts",
                  "negative_impacts", "kpis"):
        for i, entry in enumerate(getattr(w, group)):
            if not entry.strip():
                bad.add(f"{group}[{i}]")
    if not w.provenance.source.strip():
        bad.add("provenance.source")
    return bad


class TestWorksheetOracle:
    def test_randomized_mutations_match_oracle(self):
        rng = random.Random(20250809)
        mutators = [
            lambda w: dataclasses.replace(w, sector=""),
            lambda w: dataclasses.replace(w, name=" "),
            lambda w: dataclasses.replace(w, summary=""),
            lambda w: dataclasses.replace(w, direct_users=()),
            lambda w: dataclasses.replace(w, intended_outcomes=()),
            lambda w: dataclasses.replace(w, kpis=()),
            lambda w: dataclasses.replace(w, kpis=(*w.kpis, "")),
            lambda w: dataclasses.replace(
                w, direct_users=(*w.direct_users, UserDescriptor(role=" "))),
            lambda w: dataclasses.replace(
                w, positive_impacts=(*w.positive_impacts, "")),
            lambda w: dataclasses.replace(
                w, provenance=ElicitationProvenance(source="")),
            lambda w: w,  # no-op keeps some trials clean
        ]
        for _ in range(300):
            w = generators.worksheet(rng)
            for _ in range(rng.randint(0, 3)):
                w = rng.choice(mutators)(w)
            report = validate_worksheet(w)
            assert report.fields() == oracle_worksheet_violations(w)


class TestScenarioValidation:
    def test_stage1_approved_title_description_only_is_clean(self, taxonomy):
        s = make_scenario(
            taxonomy, stage_states={Stage.STAGE1: StageState.APPROVED})
        assert validate_scenario(s, taxonomy).ok

    def test_narrative_before_stage2_approval_is_one_finding(self, taxonomy):
        s = make_scenario(
            taxonomy,
            narrative="Too early.",
            direct_users=(UserDescriptor(role="analyst"),),
            indirect_users=(UserDescriptor(role="customer"),),
            intended_outcomes=("x",), benefits=("y",),
            risks=(TaggedRisk(text="z", category_id="confabulation"),),
            kpis=("k",),
            stage_states={Stage.STAGE1: StageState.APPROVED,
                          Stage.STAGE2: StageState.PENDING_REVIEW},
        )
        report = validate_scenario(s, taxonomy)
        assert len(report.findings) == 1
        assert report.findings[0].field == "narrative"
        assert report.findings[0].rule == "stage_ordering"

    def test_unknown_risk_category_exactly_one_finding(self, taxonomy):
        s = make_scenario(
            taxonomy,
            direct_users=(UserDescriptor(role="analyst"),),
            indirect_users=(UserDescriptor(role="customer"),),
            intended_outcomes=("x",), benefits=("y",),
            risks=(
                TaggedRisk(text="a", category_id="confabulation"),
                TaggedRisk(text="b", category_id="not-a-category"),
                TaggedRisk(text="c", category_id="data-privacy"),
            ),
            kpis=("k",),
            stage_states={Stage.STAGE1: StageState.APPROVED,
                          Stage.STAGE2: StageState.PENDING_REVIEW},
        )
        report = validate_scenario(s, taxonomy)
        assert len(report.findings) == 1
        assert report.findings[0].field == "risks[1].category_id"

    def test_oracle_category_linear_scan(self, taxonomy):
        rng = random.Random(7)
        known = sorted(taxonomy.category_ids())
        for _ in range(200):
            s = generators.scenario(rng, taxonomy, progress=rng.randint(1, 3))
            # corrupt a random subset of category ids
            risks = list(s.risks)
            corrupted = set()
            for i in range(len(risks)):
                if rng.random() < 0.3:
                    risks[i] = TaggedRisk(text=risks[i].text,
                                          category_id=f"bogus-{i}")
                    corrupted.add(f"risks[{i}].category_id")
            s = dataclasses.replace(s, risks=tuple(risks))
            report = validate_scenario(s, taxonomy)
            # oracle: independent linear scan over every risk
            oracle = {
                f"risks[{i}].category_id"
                for i, r in enumerate(s.risks)
                if r.category_id not in known
            }
            found = {f.field for f in report.findings
                     if f.rule == "unknown_category"}
            assert found == oracle == corrupted

    def test_stage2_content_requires_stage1_approval(self, taxonomy):
        s = make_scenario(taxonomy, benefits=("premature",))
        report = validate_scenario(s, taxonomy)
        assert "benefits" in report.fields()

    def test_unresolved_use_case_reference_is_finding(self, taxonomy):
        s = make_scenario(taxonomy)
        report = validate_scenario(s, taxonomy, known_use_case_ids={"uc-other"})
        assert any(f.rule == "unresolved_reference" for f in report.findings)

    def test_sector_divergence_from_parent(self, taxonomy):
        s = make_scenario(taxonomy, sector="Healthcare")
        parent = make_worksheet()
        report = validate_scenario(s, taxonomy, parent=parent)
        assert any(f.rule == "sector_mismatch" for f in report.findings)

    def test_revision_indices_must_be_contiguous(self, taxonomy):
        s = make_scenario(taxonomy)
        bad = dataclasses.replace(
            s, revisions=(
                s.revisions[0],
                dataclasses.replace(s.revisions[0], index=2),
            ))
        report = validate_scenario(bad, taxonomy)
        assert any(f.rule == "revision_indices" for f in report.findings)

    def test_generated_revision_requires_fingerprint(self, taxonomy):
        s = make_scenario(taxonomy)
        bad = dataclasses.replace(
            s, revisions=(dataclasses.replace(
                s.revisions[0], prompt_fingerprint=None),))
        report = validate_scenario(bad, taxonomy)
        assert any(f.rule == "fingerprint_required" for f in report.findings)

    def test_validation_is_pure(self, taxonomy):
        rng = random.Random(99)
        for _ in range(50):
            s = generators.scenario(rng, taxonomy)
            first = validate_scenario(s, taxonomy)
            second = validate_scenario(s, taxonomy)
            assert first == second

    def test_accepted_scenarios_stay_clean_after_any_legal_transition(
            self, taxonomy):
        # the ordering rules cannot be broken by a single legal state move
        rng = random.Random(4242)
        checked = 0
        for _ in range(400):
            s = generators.scenario(rng, taxonomy)
            if not validate_scenario(s, taxonomy).ok:
                continue
            for stage in Stage.ordered():
                state = s.stage_state(stage)
                for target in StageState:
                    if not is_legal_scenario_transition(s, stage, target):
                        continue
                    states = dict(s.stage_states)
                    states[stage] = target
                    moved = dataclasses.replace(s, stage_states=states)
                    report = validate_scenario(moved, taxonomy)
                    ordering = [f for f in report.findings
                                if f.rule == "stage_ordering"]
                    assert not ordering, (stage, state, target, ordering)
                    checked += 1
        assert checked > 100


class TestTwelveElementHomes:
    # every documented scenario element maps to exactly one field
    ELEMENT_FIELDS = {
        "Sector": "sector",
        "Use Case": "use_case_id",
        "Scenario Title": "title",
        "Scenario Description": "description",
        "Scenario Narrative": "narrative",
        "Evaluation Objective": "evaluation_objective",
        "Direct Users": "direct_users",
        "Indirect Users": "indirect_users",
        "Intended Outcomes": "intended_outcomes",
        "Positive Impacts/Benefits": "benefits",
        "Negative Impacts/Risks": "risks",
        "KPIs and Metrics": "kpis",
    }

    def test_twelve_elements_each_have_one_home(self, taxonomy):
        assert len(self.ELEMENT_FIELDS) == 12
        field_names = {f.name for f in dataclasses.fields(Scenario)}
        homes = list(self.ELEMENT_FIELDS.values())
        assert len(set(homes)) == 12, "element homes must be distinct"
        for home in homes:
            assert home in field_names, home
