"""Demo dataset: a claims-like schema with an ICD-style concept, plus
synthetic corpus generators for benchmarks and acceptance runs."""

from __future__ import annotations

import csv
import random
from datetime import date, timedelta

from .columns import TableSchema
from .registry import DatasetRegistry

OUTPATIENT_TABLE = {
    "name": "outpatient_diagnosis",
    "columns": [
        {"name": "icd_code", "type": "STRING"},
        {"name": "kind", "type": "STRING"},
        {"name": "visit_id", "type": "STRING"},
        {"name": "physician_id", "type": "STRING"},
        {"name": "quarter", "type": "DATE_RANGE"},
        {"name": "visit_date", "type": "DATE"},
        {"name": "fee", "type": "MONEY"},
        {"name": "severity", "type": "INTEGER"},
        {"name": "flagged", "type": "BOOLEAN"},
    ],
}

HOSPITAL_TABLE = {
    "name": "hospital_diagnosis",
    "columns": [
        {"name": "icd_code", "type": "STRING"},
        {"name": "kind", "type": "STRING"},
        {"name": "case_id", "type": "STRING"},
        {"name": "hospital_id", "type": "STRING"},
        {"name": "case_begin", "type": "DATE"},
        {"name": "case_end", "type": "DATE"},
        {"name": "case_range", "type": "DATE_RANGE"},
        {"name": "stay_day", "type": "DATE"},
        {"name": "cost", "type": "MONEY"},
    ],
}

ICD_CONCEPT = {
    "name": "icd",
    "description": "Diagnosis codes",
    "children": [
        {
            "name": "a00-b99",
            "description": "Certain infectious and parasitic diseases",
            "condition": {"type": "PREFIX_RANGE", "min": "A00", "max": "B99"},
            "children": [
                {"name": "a00", "condition": {"type": "PREFIX", "prefix": "A00"}},
                {"name": "b20x", "condition": {"type": "EQUAL", "values": ["B20", "B21"]}},
            ],
        },
        {
            "name": "g00-g99",
            "description": "Diseases of the nervous system",
            "condition": {"type": "PREFIX_RANGE", "min": "G00", "max": "G99"},
            "children": [
                {
                    "name": "g20-g26",
                    "description": "Extrapyramidal and movement disorders",
                    "condition": {"type": "PREFIX_RANGE", "min": "G20", "max": "G26"},
                    "children": [
                        {
                            "name": "g20",
                            "description": "Parkinson's disease",
                            "condition": {"type": "PREFIX", "prefix": "G20"},
                            "children": [
                                {
                                    "name": "g20_conf",
                                    "description": "Confirmed Parkinson's disease",
                                    "condition": {
                                        "type": "AND",
                                        "conditions": [
                                            {"type": "PREFIX", "prefix": "G20"},
                                            {
                                                "type": "COLUMN_EQUAL",
                                                "column": "kind",
                                                "values": ["confirmed", "primary"],
                                            },
                                        ],
                                    },
                                },
                                {
                                    "name": "g20_1",
                                    "condition": {"type": "PREFIX", "prefix": "G201"},
                                    "children": [
                                        {
                                            "name": "g20_11",
                                            "condition": {"type": "PREFIX", "prefix": "G2011"},
                                        }
                                    ],
                                },
                            ],
                        },
                        {"name": "g25", "condition": {"type": "PREFIX", "prefix": "G25"}},
                    ],
                },
            ],
        },
        {
            "name": "m00-m99",
            "description": "Diseases of the musculoskeletal system",
            "condition": {"type": "PREFIX_RANGE", "min": "M00", "max": "M99"},
            "children": [
                {
                    "name": "m54",
                    "condition": {
                        "type": "OR",
                        "conditions": [
                            {"type": "PREFIX", "prefix": "M54"},
                            {"type": "EQUAL", "values": ["M99"]},
                        ],
                    },
                },
                {
                    "name": "m_rest",
                    "condition": {
                        "type": "AND",
                        "conditions": [
                            {"type": "PREFIX_RANGE", "min": "M00", "max": "M99"},
                            {"type": "NOT", "condition": {"type": "PREFIX", "prefix": "M54"}},
                        ],
                    },
                },
            ],
        },
    ],
    "connectors": [
        {
            "label": "Physician Diagnoses",
            "name": "physician_diagnoses",
            "column": "outpatient_diagnosis.icd_code",
            "validityDates": [
                {"label": "Quarter", "column": "outpatient_diagnosis.quarter"},
                {"label": "Visit date", "column": "outpatient_diagnosis.visit_date"},
            ],
            "filters": [
                {
                    "type": "SELECT",
                    "name": "kind",
                    "label": "Diagnosis certainty",
                    "column": "outpatient_diagnosis.kind",
                    "labels": {
                        "confirmed": "Confirmed",
                        "suspected": "Suspected",
                        "excluded": "Excluded",
                    },
                },
                {
                    "type": "COUNT",
                    "name": "visits",
                    "label": "Number of visits",
                    "column": "outpatient_diagnosis.visit_id",
                    "distinct": True,
                },
                {
                    "type": "RANGE",
                    "name": "fee",
                    "label": "Fee",
                    "column": "outpatient_diagnosis.fee",
                },
                {
                    "type": "COUNT_QUARTERS",
                    "name": "quarters",
                    "label": "Quarters",
                    "column": "outpatient_diagnosis.quarter",
                },
                {
                    "type": "RANGE",
                    "name": "severity",
                    "label": "Severity",
                    "column": "outpatient_diagnosis.severity",
                },
            ],
            "selects": [
                {
                    "type": "DISTINCT",
                    "name": "icd_codes",
                    "label": "Outpatient ICD-Code",
                    "column": "outpatient_diagnosis.icd_code",
                },
                {
                    "type": "COUNT",
                    "name": "visit_count",
                    "label": "Number of physician visits",
                    "column": "outpatient_diagnosis.visit_id",
                    "distinct": True,
                },
                {
                    "type": "COUNT_QUARTERS",
                    "name": "quarter_count",
                    "label": "Number of quarters",
                    "column": "outpatient_diagnosis.quarter",
                },
                {
                    "type": "COUNT",
                    "name": "physician_count",
                    "label": "Number of physicians visited",
                    "column": "outpatient_diagnosis.physician_id",
                    "distinct": True,
                },
                {"type": "EVENT_DATES", "name": "dates", "label": "Outpatient dates"},
                {"type": "EXISTS", "name": "seen", "label": "Outpatient contact"},
                {
                    "type": "DISTINCT",
                    "name": "kinds",
                    "label": "Certainty kinds",
                    "column": "outpatient_diagnosis.kind",
                },
            ],
        },
        {
            "label": "Hospital Diagnoses",
            "name": "hospital_diagnoses",
            "column": "hospital_diagnosis.icd_code",
            "validityDates": [
                {"label": "Case begin", "column": "hospital_diagnosis.case_begin"},
                {"label": "Case end", "column": "hospital_diagnosis.case_end"},
                {"label": "Case range", "column": "hospital_diagnosis.case_range"},
            ],
            "filters": [
                {
                    "type": "SELECT",
                    "name": "diagnosis_kind",
                    "label": "Diagnose kind",
                    "column": "hospital_diagnosis.kind",
                    "labels": {
                        "primary": "Primary",
                        "secondary": "Secondary",
                        "initial": "Initial",
                    },
                },
                {
                    "type": "COUNT",
                    "name": "case_number",
                    "label": "Case number",
                    "column": "hospital_diagnosis.case_id",
                    "distinct": True,
                },
                {
                    "type": "RANGE",
                    "name": "cost",
                    "label": "Cost",
                    "column": "hospital_diagnosis.cost",
                },
                {
                    "type": "COUNT",
                    "name": "documented_days",
                    "label": "Documented days",
                    "column": "hospital_diagnosis.stay_day",
                    "distinct": False,
                },
            ],
            "selects": [
                {
                    "type": "DISTINCT",
                    "name": "icd_codes",
                    "label": "List of inpatient ICD-Codes",
                    "column": "hospital_diagnosis.icd_code",
                },
                {
                    "type": "COUNT",
                    "name": "number_of_cases",
                    "label": "Number of Cases",
                    "column": "hospital_diagnosis.case_id",
                    "distinct": True,
                },
                {
                    "type": "COUNT",
                    "name": "hospital_count",
                    "label": "Number of hospitals visited",
                    "column": "hospital_diagnosis.hospital_id",
                    "distinct": True,
                },
                {
                    "type": "COUNT",
                    "name": "stay_length",
                    "label": "Length of hospital stays",
                    "column": "hospital_diagnosis.stay_day",
                    "distinct": True,
                },
                {"type": "EVENT_DATES", "name": "dates", "label": "Inpatient dates"},
                {"type": "EXISTS", "name": "seen", "label": "Hospitalized"},
                {
                    "type": "COUNT_QUARTERS",
                    "name": "case_quarters",
                    "label": "Case quarters",
                    "column": "hospital_diagnosis.case_range",
                },
            ],
        },
    ],
}


def demo_registry(dataset: str = "dataset") -> DatasetRegistry:
    reg = DatasetRegistry(dataset)
    reg.add_table(TableSchema.from_document(OUTPATIENT_TABLE))
    reg.add_table(TableSchema.from_document(HOSPITAL_TABLE))
    reg.add_concept(ICD_CONCEPT)
    return reg


def dataset_config_document(dataset: str = "dataset") -> dict:
    return {
        "dataset": dataset,
        "tables": [OUTPATIENT_TABLE, HOSPITAL_TABLE],
        "concepts": [ICD_CONCEPT],
    }


# ---------------------------------------------------------------------------
# Synthetic corpora

_ICD_LETTERS = "ABEFGIJKMNZ"


def _code_pool(rng: random.Random, size: int = 800) -> list[str]:
    pool = set()
    while len(pool) < size:
        code = (
            rng.choice(_ICD_LETTERS)
            + f"{rng.randrange(100):02d}"
            + str(rng.randrange(10))
            + (str(rng.randrange(10)) if rng.random() < 0.5 else "")
        )
        pool.add(code)
    out = sorted(pool)
    # make sure the interesting subtree is populated
    out[:6] = ["G2000", "G2011", "G2090", "G2110", "G2500", "M5410"]
    return out


def _zipf_choice(rng: random.Random, pool: list[str]) -> str:
    # skewed towards the front of the pool, like real diagnosis frequencies
    r = rng.random()
    idx = int(len(pool) * (r ** 2.5))
    return pool[min(idx, len(pool) - 1)]


def _quarter_range(d: date) -> tuple[str, str]:
    q = (d.month - 1) // 3
    first = date(d.year, q * 3 + 1, 1)
    last = date(d.year, 12, 31) if q == 3 else date(d.year, q * 3 + 4, 1) - timedelta(days=1)
    return first.isoformat(), last.isoformat()


OUTPATIENT_HEADERS = [
    "pid", "icd", "kind", "visit", "physician",
    "q_begin", "q_end", "visit_date", "fee", "severity", "flagged",
]


def write_outpatient_corpus(path: str, n_events: int, n_entities: int, seed: int = 1) -> None:
    """Claims-like outpatient events as delimited text (the compression
    benchmark input)."""
    rng = random.Random(seed)
    pool = _code_pool(rng)
    kinds = ["confirmed", "suspected", "excluded"]
    base = date(2014, 1, 1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=";", lineterminator="\n")
        w.writerow(OUTPATIENT_HEADERS)
        written = 0
        entity = 0
        while written < n_events:
            entity = entity % n_entities + 1
            pid = f"P{entity:07d}"
            for _ in range(min(rng.randrange(1, 14), n_events - written)):
                d = base + timedelta(days=rng.randrange(0, 4 * 365))
                qb, qe = _quarter_range(d)
                w.writerow(
                    [
                        pid,
                        _zipf_choice(rng, pool),
                        rng.choice(kinds),
                        f"v{rng.randrange(1, 1 + 10)}",
                        f"p{rng.randrange(1, 2001):05d}",
                        qb,
                        qe,
                        d.isoformat(),
                        f"{rng.randrange(500, 25000) / 100:.2f}",
                        str(rng.randrange(0, 10)),
                        "true" if rng.random() < 0.4 else "false",
                    ]
                )
                written += 1


OUTPATIENT_IMPORT_DESCRIPTOR = {
    "table": "outpatient_diagnosis",
    "entityColumn": "pid",
    "columns": [
        {"source": "icd", "target": "icd_code", "stripDots": True},
        {"source": "kind", "target": "kind"},
        {"source": "visit", "target": "visit_id"},
        {"source": "physician", "target": "physician_id"},
        {"sourceMin": "q_begin", "sourceMax": "q_end", "target": "quarter"},
        {"source": "visit_date", "target": "visit_date"},
        {"source": "fee", "target": "fee"},
        {"source": "severity", "target": "severity"},
        {"source": "flagged", "target": "flagged"},
    ],
}


def scaling_rows(
    n_entities: int, events_per_entity: int, seed: int = 2
) -> dict[str, dict[str, list[dict]]]:
    """Raw in-memory rows for the throughput benchmark (no CSV round trip)."""
    rng = random.Random(seed)
    pool = _code_pool(rng, 200)
    kinds = ["confirmed", "suspected", "excluded"]
    base = date(2014, 1, 1)
    out: dict[str, list[dict]] = {}
    for i in range(n_entities):
        pid = f"P{i + 1:07d}"
        rows = []
        for _ in range(events_per_entity):
            d = base + timedelta(days=rng.randrange(0, 4 * 365))
            qb, qe = _quarter_range(d)
            rows.append(
                {
                    "icd_code": _zipf_choice(rng, pool),
                    "kind": rng.choice(kinds),
                    "visit_id": f"v{rng.randrange(1, 9)}",
                    "physician_id": f"p{rng.randrange(1, 300):04d}",
                    "quarter": (date.fromisoformat(qb), date.fromisoformat(qe)),
                    "visit_date": d,
                    "fee": None,
                    "severity": rng.randrange(0, 10),
                    "flagged": rng.random() < 0.4,
                }
            )
        out[pid] = rows
    return {"outpatient_diagnosis": out, "hospital_diagnosis": {}}
