"""Query document parsing, validation and result headers."""

import random

import pytest

from cohortq.errors import ValidationError
from cohortq.querymodel import parse_query, result_header

from fixtures_common import claims_registry
from generators import gen_query_doc

CODE3_DOC = {
    "type": "CONCEPT_QUERY",
    "root": {
        "type": "CONCEPT",
        "ids": ["dataset.icd.g00-g99.g20-g26.g20"],
        "tables": [
            {
                "id": "dataset.icd.hospital_diagnoses",
                "filters": [
                    {
                        "type": "SELECT",
                        "filter": "dataset.icd.hospital_diagnoses.diagnosis_kind",
                        "value": "primary",
                    }
                ],
                "selects": ["dataset.icd.hospital_diagnoses.number_of_cases"],
            }
        ],
    },
}


@pytest.fixture(scope="module")
def registry():
    return claims_registry()


def test_parse_reference_query_document(registry):
    ast = parse_query(CODE3_DOC, registry)
    assert ast.root.kind == "CONCEPT"
    assert ast.root.node_paths == ["icd.g00-g99.g20-g26.g20"]
    assert len(ast.root.tables) == 1
    table = ast.root.tables[0]
    assert table.connector.name == "hospital_diagnoses"
    assert table.filters[0].filter.type == "SELECT"
    assert table.filters[0].value.keys == ("primary",)
    assert [s.select.name for s in table.selects] == ["number_of_cases"]


def test_result_header_of_reference_document(registry):
    ast = parse_query(CODE3_DOC, registry)
    assert [c.label for c in result_header(ast)] == ["result", "dates", "Number of Cases"]


def test_header_no_selects(registry):
    doc = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [{"id": "dataset.icd.physician_diagnoses"}],
        },
    }
    assert [c.label for c in result_header(parse_query(doc, registry))] == ["result", "dates"]


def test_header_duplicate_labels_get_connector_prefix(registry):
    doc = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "AND",
            "children": [
                {
                    "type": "CONCEPT",
                    "ids": ["dataset.icd.g00-g99"],
                    "tables": [
                        {
                            "id": "dataset.icd.physician_diagnoses",
                            "selects": ["dataset.icd.physician_diagnoses.seen"],
                        }
                    ],
                },
                {
                    "type": "CONCEPT",
                    "ids": ["dataset.icd.m00-m99"],
                    "tables": [
                        {
                            "id": "dataset.icd.physician_diagnoses",
                            "selects": [
                                "dataset.icd.physician_diagnoses.seen",
                                "dataset.icd.physician_diagnoses.icd_codes",
                            ],
                        }
                    ],
                },
            ],
        },
    }
    labels = [c.label for c in result_header(parse_query(doc, registry))]
    assert labels == [
        "result",
        "dates",
        "Physician Diagnoses Outpatient contact",
        "Physician Diagnoses Outpatient contact",
        "Outpatient ICD-Code",
    ]


def test_empty_and_rejected(registry):
    with pytest.raises(ValidationError, match="AND"):
        parse_query(
            {"type": "CONCEPT_QUERY", "root": {"type": "AND", "children": []}}, registry
        )


def test_relative_construct_rejected(registry):
    with pytest.raises(ValidationError, match="unknown query node type"):
        parse_query(
            {
                "type": "CONCEPT_QUERY",
                "root": {"type": "PERCENTILE", "of": "visits", "p": 50},
            },
            registry,
        )


def test_violations_are_collected_not_first_only(registry):
    doc = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [
                {
                    "id": "dataset.icd.physician_diagnoses",
                    "filters": [
                        {"filter": "dataset.icd.physician_diagnoses.nope", "value": "x"},
                        {
                            "filter": "dataset.icd.physician_diagnoses.visits",
                            "value": {"min": 5, "max": 2},
                        },
                    ],
                    "selects": ["dataset.icd.physician_diagnoses.also_nope"],
                }
            ],
        },
    }
    with pytest.raises(ValidationError) as err:
        parse_query(doc, registry)
    text = str(err.value)
    assert "unknown filter id" in text
    assert "greater than max" in text
    assert "unknown select id" in text
    assert len(err.value.violations) == 3


def test_filter_value_typing(registry):
    base = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [
                {
                    "id": "dataset.icd.physician_diagnoses",
                    "filters": [
                        {"filter": "dataset.icd.physician_diagnoses.kind", "value": "bogus"}
                    ],
                }
            ],
        },
    }
    with pytest.raises(ValidationError, match="unknown SELECT keys"):
        parse_query(base, registry)

    bad_range = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [
                {
                    "id": "dataset.icd.physician_diagnoses",
                    "filters": [
                        {
                            "filter": "dataset.icd.physician_diagnoses.severity",
                            "value": {"min": 1.5},
                        }
                    ],
                }
            ],
        },
    }
    with pytest.raises(ValidationError, match="integer"):
        parse_query(bad_range, registry)


def test_secondary_key_must_exist(registry):
    doc = dict(CODE3_DOC, secondaryKey="physician_id")  # only in the outpatient table
    with pytest.raises(ValidationError, match="secondaryKey"):
        parse_query(doc, registry)
    ok = dict(CODE3_DOC, secondaryKey="case_id")
    assert parse_query(ok, registry).secondary_key == "case_id"


def test_parse_serialize_round_trip_random(registry):
    rng = random.Random(31)
    for _ in range(120):
        doc = gen_query_doc(rng, ["saved-x"])
        ast1 = parse_query(doc, registry)
        doc2 = ast1.to_document()
        ast2 = parse_query(doc2, registry)
        assert ast2.to_document() == doc2
        assert [c.label for c in result_header(ast1)] == [c.label for c in result_header(ast2)]


def test_date_restriction_validation(registry):
    bad = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "DATE_RESTRICTION",
            "dateRange": {"min": "2016-01-01", "max": "2015-01-01"},
            "child": CODE3_DOC["root"],
        },
    }
    with pytest.raises(ValidationError, match="min after max"):
        parse_query(bad, registry)
    missing = {
        "type": "CONCEPT_QUERY",
        "root": {"type": "DATE_RESTRICTION", "dateRange": {}, "child": CODE3_DOC["root"]},
    }
    with pytest.raises(ValidationError, match="min and/or max"):
        parse_query(missing, registry)
