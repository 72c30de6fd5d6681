"""Taxonomy loading and coverage-report tests with brute-force oracles."""

import json
import random

import pytest

from scenarioforge.errors import TaxonomyError
from scenarioforge.taxonomy import (
    coverage_report,
    default_taxonomy,
    load_taxonomy,
)

import generators


def write_taxonomy(path, categories):
    doc = {
        "kind": "risk_taxonomy",
        "source_name": "test",
        "version": "0",
        "categories": categories,
    }
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


class TestLoadTaxonomy:
    def test_default_has_categories_with_unique_ids(self):
        t = default_taxonomy()
        assert len(t.categories) >= 1
        ids = [c.id for c in t.categories]
        assert len(set(ids)) == len(ids)
        assert t.source_name

    def test_missing_file(self, tmp_path):
        with pytest.raises(TaxonomyError, match="not found"):
            load_taxonomy(tmp_path / "nope.json")

    def test_empty_taxonomy_rejected(self, tmp_path):
        path = write_taxonomy(tmp_path / "t.json", [])
        with pytest.raises(TaxonomyError, match="empty taxonomy"):
            load_taxonomy(path)

    def test_duplicate_id_named(self, tmp_path):
        path = write_taxonomy(tmp_path / "t.json", [
            {"id": "cbrn", "name": "A", "summary": "a"},
            {"id": "other", "name": "B", "summary": "b"},
            {"id": "cbrn", "name": "C", "summary": "c"},
        ])
        with pytest.raises(TaxonomyError, match="duplicate category id.*cbrn"):
            load_taxonomy(path)

    def test_duplicate_detection_matches_sort_scan_oracle(self, tmp_path):
        # oracle: sort ids, scan adjacent pairs
        rng = random.Random(13)
        for _ in range(50):
            ids = [f"cat-{rng.randint(0, 9)}" for _ in range(rng.randint(1, 8))]
            cats = [{"id": i, "name": i.upper(), "summary": "s"} for i in ids]
            path = write_taxonomy(tmp_path / "t.json", cats)
            ordered = sorted(ids)
            has_dup = any(a == b for a, b in zip(ordered, ordered[1:]))
            if has_dup:
                with pytest.raises(TaxonomyError):
                    load_taxonomy(path)
            else:
                assert load_taxonomy(path).category_ids() == frozenset(ids)

    def test_blank_fields_rejected(self, tmp_path):
        path = write_taxonomy(tmp_path / "t.json", [
            {"id": "x", "name": " ", "summary": "s"}])
        with pytest.raises(TaxonomyError, match="empty name"):
            load_taxonomy(path)


class TestCoverage:
    def test_empty_scenario_list_all_zero(self, taxonomy):
        report = coverage_report([], taxonomy)
        assert report.total_scenarios == 0
        assert set(report.counts.values()) == {0}
        assert report.flagged == ()

    def test_two_scenarios_one_category(self, taxonomy):
        import dataclasses

        rng = random.Random(14)
        cat = sorted(taxonomy.category_ids())[0]
        scenarios = []
        for _ in range(2):
            s = generators.scenario(rng, taxonomy, progress=2)
            risks = tuple(
                type(r)(text=r.text, category_id=cat) for r in s.risks)
            assert risks
            scenarios.append(dataclasses.replace(s, risks=risks))
        assert len(scenarios) == 2
        report = coverage_report(scenarios, taxonomy)
        assert report.counts[cat] == 2
        assert all(n == 0 for c, n in report.counts.items() if c != cat)

    def test_counts_match_nested_loop_oracle(self, taxonomy):
        rng = random.Random(15)
        scenarios = [generators.scenario(rng, taxonomy,
                                         progress=rng.randint(0, 3))
                     for _ in range(50)]
        report = coverage_report(scenarios, taxonomy)
        # independent nested-loop tally
        for category in taxonomy.categories:
            expected = 0
            for s in scenarios:
                hit = False
                for risk in s.risks:
                    if risk.category_id == category.id:
                        hit = True
                expected += 1 if hit else 0
            assert report.counts[category.id] == expected

    def test_permutation_invariance(self, taxonomy):
        rng = random.Random(16)
        scenarios = [generators.scenario(rng, taxonomy,
                                         progress=rng.randint(1, 3))
                     for _ in range(20)]
        base = coverage_report(scenarios, taxonomy)
        for _ in range(5):
            rng.shuffle(scenarios)
            shuffled = coverage_report(scenarios, taxonomy)
            assert shuffled.counts == base.counts
            assert shuffled.per_use_case == base.per_use_case

    def test_scenarios_with_risks_contribute_somewhere(self, taxonomy):
        rng = random.Random(17)
        scenarios = [generators.scenario(rng, taxonomy,
                                         progress=rng.randint(0, 3))
                     for _ in range(40)]
        report = coverage_report(scenarios, taxonomy)
        with_risks = sum(1 for s in scenarios if s.risks)
        assert sum(report.counts.values()) >= with_risks

    def test_floor_flags_under_covered(self, taxonomy):
        report = coverage_report([], taxonomy, floor=1)
        assert set(report.flagged) == set(taxonomy.category_ids())

    def test_per_use_case_breakdown(self, taxonomy):
        rng = random.Random(18)
        scenarios = [
            generators.scenario(rng, taxonomy, use_case_id="uc-a", progress=2),
            generators.scenario(rng, taxonomy, use_case_id="uc-b", progress=2),
        ]
        report = coverage_report(scenarios, taxonomy)
        assert set(report.per_use_case) == {"uc-a", "uc-b"}
        for uc, counts in report.per_use_case.items():
            for cat, n in counts.items():
                assert n <= report.counts[cat]
