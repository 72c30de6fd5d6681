"""Round-trip and canonical-bytes tests for the document encoding."""

import dataclasses
import json
import random

import pytest

from scenarioforge import canonical
from scenarioforge.bootstrap import fixture_worksheets
from scenarioforge.errors import ParseError
from scenarioforge.jobs import ExpansionJob, JobStatus
from scenarioforge.rubric import default_rubric
from scenarioforge.schema import Stage
from scenarioforge.taxonomy import default_taxonomy

import generators


class TestRoundTrip:
    def test_fixture_worksheets_round_trip(self):
        worksheets = fixture_worksheets()
        assert len(worksheets) == 6
        for w in worksheets:
            data = canonical.serialize(w)
            assert canonical.parse(data) == w

    def test_random_worksheets_round_trip(self):
        rng = random.Random(1)
        for _ in range(200):
            w = generators.worksheet(rng)
            assert canonical.parse(canonical.serialize(w)) == w

    def test_random_scenarios_round_trip_and_double_serialize(self, taxonomy):
        rng = random.Random(2)
        for _ in range(200):
            s = generators.scenario(rng, taxonomy)
            data = canonical.serialize(s)
            parsed = canonical.parse(data)
            assert parsed == s
            assert canonical.serialize(parsed) == data

    def test_taxonomy_and_rubric_round_trip(self):
        t = default_taxonomy()
        assert canonical.parse(canonical.serialize(t)) == t
        r = default_rubric()
        assert canonical.parse(canonical.serialize(r)) == r

    def test_job_round_trip(self):
        job = ExpansionJob(
            id="job-00001", use_case_id="uc-x", stage=Stage.STAGE1,
            status=JobStatus.AWAITING_REVIEW, target_count=18, attempts=2,
            backend_id="mock", detail="created 18", scenario_ids=("sc-a",))
        assert canonical.parse(canonical.serialize(job)) == job


class TestCanonicalBytes:
    def test_equal_documents_identical_bytes(self, taxonomy):
        rng1, rng2 = random.Random(3), random.Random(3)
        a = generators.scenario(rng1, taxonomy)
        b = generators.scenario(rng2, taxonomy)
        assert a == b
        assert canonical.serialize(a) == canonical.serialize(b)

    def test_payload_key_order_does_not_change_bytes(self, taxonomy):
        s = generators.scenario(random.Random(4), taxonomy, progress=1)
        rev = s.revisions[0]
        shuffled_payload = dict(reversed(list(rev.payload.items())))
        t = dataclasses.replace(
            s, revisions=(dataclasses.replace(rev, payload=shuffled_payload),
                          *s.revisions[1:]))
        assert s == t
        assert canonical.serialize(s) == canonical.serialize(t)

    def test_kind_is_first_key(self, taxonomy):
        s = generators.scenario(random.Random(5), taxonomy)
        obj = json.loads(canonical.serialize(s))
        assert next(iter(obj)) == "kind"


class TestParseErrors:
    def test_empty_input(self):
        with pytest.raises(ParseError, match="empty document"):
            canonical.parse(b"")
        with pytest.raises(ParseError, match="empty document"):
            canonical.parse("   \n  ")

    def test_invalid_json_reports_position(self):
        try:
            canonical.parse(b'{"kind": "scenario", \n  "id": }')
        except ParseError as e:
            assert e.line == 2
            assert e.column is not None
        else:
            pytest.fail("expected ParseError")

    def test_unknown_kind(self):
        with pytest.raises(ParseError, match="unknown document kind"):
            canonical.parse(b'{"kind": "mystery"}')

    def test_missing_kind(self):
        with pytest.raises(ParseError, match="missing field 'kind'"):
            canonical.parse(b'{"id": "x"}')

    def test_missing_field_names_path(self, taxonomy):
        s = generators.scenario(random.Random(6), taxonomy)
        obj = json.loads(canonical.serialize(s))
        del obj["title"]
        with pytest.raises(ParseError, match="missing field 'title'"):
            canonical.parse_obj(obj)

    def test_wrong_type_reports_path(self):
        w = generators.worksheet(random.Random(7))
        obj = json.loads(canonical.serialize(w))
        obj["kpis"] = "not-a-list"
        with pytest.raises(ParseError, match=r"\$\.kpis"):
            canonical.parse_obj(obj)

    def test_bad_enum_value(self, taxonomy):
        s = generators.scenario(random.Random(8), taxonomy)
        obj = json.loads(canonical.serialize(s))
        obj["stage_states"]["stage1"] = "on-fire"
        with pytest.raises(ParseError, match="invalid StageState"):
            canonical.parse_obj(obj)


class TestStrictLenient:
    def test_strict_rejects_unknown_fields(self):
        w = generators.worksheet(random.Random(9))
        obj = json.loads(canonical.serialize(w))
        obj["surprise"] = 1
        with pytest.raises(ParseError, match="unknown field 'surprise'"):
            canonical.parse_obj(obj, canonical.STRICT)

    def test_lenient_preserves_unknown_fields(self):
        w = generators.worksheet(random.Random(10))
        obj = json.loads(canonical.serialize(w))
        obj["surprise"] = {"z": 1, "a": [2]}
        obj["another"] = "kept"
        parsed = canonical.parse_obj(obj, canonical.LENIENT)
        assert parsed.extra == {"surprise": {"z": 1, "a": [2]}, "another": "kept"}
        # survives re-serialization and re-parses identically
        data = canonical.serialize(parsed)
        again = canonical.parse(data, canonical.LENIENT)
        assert again == parsed
        round_obj = json.loads(data)
        assert round_obj["another"] == "kept"

    def test_lenient_drops_nested_unknowns(self):
        w = generators.worksheet(random.Random(11))
        obj = json.loads(canonical.serialize(w))
        obj["provenance"]["mystery"] = True
        parsed = canonical.parse_obj(obj, canonical.LENIENT)
        assert "mystery" not in canonical.doc_to_dict(parsed)["provenance"]
        with pytest.raises(ParseError, match="unknown field 'mystery'"):
            canonical.parse_obj(obj, canonical.STRICT)
