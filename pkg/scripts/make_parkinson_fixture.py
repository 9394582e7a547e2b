#!/usr/bin/env python3
"""Regenerates the committed cohort-selection fixture under
tests/fixtures/parkinson/: raw event files for eleven patients, import
descriptors, the dataset config, the query document, and the golden CSV the
query must reproduce byte for byte.

The golden file is the hand-written expected output (it is NOT produced by
running the engine); the event data here is constructed so that a correct
engine must reproduce exactly those eleven rows.
"""

import csv
import json
import os
import sys
from datetime import date, timedelta

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cohortq.synth import dataset_config_document  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "parkinson")

Q = {
    1: ("2015-01-01", "2015-03-31"),
    2: ("2015-04-01", "2015-06-30"),
    3: ("2015-07-01", "2015-09-30"),
    4: ("2015-10-01", "2015-12-31"),
}


def visit(pid, icd, v, phys, quarter, day_in_q=15, kind="confirmed"):
    qb, qe = Q[quarter]
    vd = (date.fromisoformat(qb) + timedelta(days=day_in_q)).isoformat()
    return [pid, icd, kind, f"v{v}", phys, qb, qe, vd, "50.00", "3", "false"]


def visit_exact(pid, icd, v, phys, day_iso, kind="confirmed"):
    return [pid, icd, kind, f"v{v}", phys, day_iso, day_iso, day_iso, "50.00", "3", "false"]


def hospital_case(pid, icd, case, hospital, begin_iso, days, kind="primary", known_days=True):
    """One row per stay day; days=0 emits a single row without a stay day."""
    begin = date.fromisoformat(begin_iso)
    rows = []
    if days == 0:
        rows.append([pid, icd, kind, case, hospital, begin_iso, "", "", "", "", "1200.00"])
        return rows
    end = begin + timedelta(days=days - 1)
    for i in range(days):
        stay = (begin + timedelta(days=i)).isoformat()
        rows.append(
            [
                pid,
                icd,
                kind,
                case,
                hospital,
                begin_iso,
                end.isoformat(),
                begin_iso,
                end.isoformat(),
                stay,
                "1200.00",
            ]
        )
    return rows


def outpatient_rows():
    rows = []
    # PID 2: 11 G2090 visits, 4 quarters, physicians p1 p2 p3 (plus one
    # M541 visit that must not influence any aggregate)
    for i, (q, p) in enumerate(
        [(1, "p1"), (1, "p2"), (1, "p1"), (2, "p1"), (2, "p3"), (2, "p1"),
         (3, "p2"), (3, "p1"), (3, "p3"), (4, "p1"), (4, "p2")]
    ):
        rows.append(visit("2", "G2090", i + 1, p, q))
    rows.append(visit("2", "M541", 99, "p9", 1))
    # PID 3: 2 visits in Q3/Q4, one physician
    rows.append(visit("3", "G2090", 1, "p1", 3))
    rows.append(visit("3", "G2090", 2, "p1", 4))
    # PID 4: 12 visits, 4 quarters, 3 physicians, codes G2090 then G2010
    for i, (q, p, icd) in enumerate(
        [(1, "p1", "G2090"), (1, "p2", "G2090"), (1, "p1", "G2010"),
         (2, "p1", "G2090"), (2, "p1", "G2090"), (2, "p3", "G2090"),
         (3, "p2", "G2090"), (3, "p1", "G2010"), (3, "p3", "G2090"),
         (4, "p1", "G2090"), (4, "p2", "G2090"), (4, "p3", "G2090")]
    ):
        rows.append(visit("4", icd, i + 1, p, q))
    # PID 6: 4 visits over Q2..Q4, 2 physicians
    rows.append(visit("6", "G2090", 1, "p1", 2))
    rows.append(visit("6", "G2090", 2, "p2", 3))
    rows.append(visit("6", "G2010", 3, "p1", 3))
    rows.append(visit("6", "G2090", 4, "p1", 4))
    # PID 7: one quarter-billed visit in Q1, one exact-dated visit on 09-18
    rows.append(visit("7", "G2090", 1, "p1", 1))
    rows.append(visit_exact("7", "G2000", 2, "p2", "2015-09-18"))
    # PID 8: 9 visits, 4 quarters, 5 physicians, codes G2090 then G201
    for i, (q, p, icd) in enumerate(
        [(1, "p1", "G2090"), (1, "p2", "G2090"), (2, "p3", "G201"),
         (2, "p1", "G2090"), (3, "p4", "G2090"), (3, "p5", "G2090"),
         (4, "p1", "G2090"), (4, "p2", "G201"), (4, "p3", "G2090")]
    ):
        rows.append(visit("8", icd, i + 1, p, q))
    # PID 9: 5 visits, 4 quarters, 2 physicians
    for i, (q, p) in enumerate([(1, "p1"), (2, "p1"), (3, "p2"), (4, "p1"), (4, "p2")]):
        rows.append(visit("9", "G2090", i + 1, p, q))
    # PID 10: 9 visits, 4 quarters, 3 physicians
    for i, (q, p) in enumerate(
        [(1, "p1"), (1, "p2"), (2, "p1"), (2, "p3"), (3, "p1"), (3, "p2"),
         (4, "p3"), (4, "p1"), (4, "p2")]
    ):
        rows.append(visit("10", "G2090", i + 1, p, q))
    # PID 11: 11 visits, 4 quarters, 4 physicians, codes G2090, G2000, G2010
    for i, (q, p, icd) in enumerate(
        [(1, "p1", "G2090"), (1, "p2", "G2000"), (1, "p1", "G2090"),
         (2, "p3", "G2010"), (2, "p1", "G2090"), (2, "p2", "G2090"),
         (3, "p4", "G2090"), (3, "p1", "G2090"),
         (4, "p2", "G2090"), (4, "p3", "G2090"), (4, "p1", "G2090")]
    ):
        rows.append(visit("11", icd, i + 1, p, q))
    # PID 12: non-Parkinson codes only; must not appear in the result
    rows.append(visit("12", "A001", 1, "p1", 1))
    rows.append(visit("12", "M541", 2, "p2", 2))
    return rows


def hospital_rows():
    rows = []
    # PID 1: two cases, 6 + 4 stay days, two hospitals
    rows += hospital_case("1", "G2090", "c1", "h1", "2015-07-16", 6)
    rows += hospital_case("1", "G2000", "c2", "h2", "2015-12-04", 4)
    # PID 3: an unrelated A00 case; the Parkinson query must ignore it
    rows += hospital_case("3", "A001", "c3", "h1", "2015-03-03", 2)
    # PID 4: one case, 4 days
    rows += hospital_case("4", "G2090", "c4", "h1", "2015-06-10", 4)
    # PID 5: two G2010 cases, 3 + 5 days
    rows += hospital_case("5", "G2010", "c5", "h1", "2015-02-05", 3)
    rows += hospital_case("5", "G2010", "c6", "h2", "2015-02-10", 5)
    # PID 7: one case, 10 days, starting 09-18
    rows += hospital_case("7", "G2090", "c7", "h1", "2015-09-18", 10)
    # PID 8: two cases, 15 + 18 days
    rows += hospital_case("8", "G2010", "c8", "h1", "2015-01-15", 15)
    rows += hospital_case("8", "G2020", "c9", "h2", "2015-06-01", 18)
    # PID 10: one case, 4 days
    rows += hospital_case("10", "G2090", "c10", "h2", "2015-08-20", 4)
    # PID 11: a case without documented stay days
    rows += hospital_case("11", "G2010", "c11", "h1", "2015-05-10", 0)
    # PID 12: unrelated case
    rows += hospital_case("12", "A001", "c12", "h1", "2015-04-01", 3)
    return rows


OUTPATIENT_HEADERS = [
    "pid", "icd", "kind", "visit", "physician",
    "q_begin", "q_end", "visit_date", "fee", "severity", "flagged",
]
HOSPITAL_HEADERS = [
    "pid", "icd", "kind", "case", "hospital",
    "begin", "end", "range_begin", "range_end", "stay_day", "cost",
]

OUTPATIENT_DESCRIPTOR = {
    "table": "outpatient_diagnosis",
    "label": "outpatient2015",
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

HOSPITAL_DESCRIPTOR = {
    "table": "hospital_diagnosis",
    "label": "hospital2015",
    "entityColumn": "pid",
    "columns": [
        {"source": "icd", "target": "icd_code", "stripDots": True},
        {"source": "kind", "target": "kind"},
        {"source": "case", "target": "case_id"},
        {"source": "hospital", "target": "hospital_id"},
        {"source": "begin", "target": "case_begin"},
        {"source": "end", "target": "case_end"},
        {"sourceMin": "range_begin", "sourceMax": "range_end", "target": "case_range"},
        {"source": "stay_day", "target": "stay_day"},
        {"source": "cost", "target": "cost"},
    ],
}

AMB = "dataset.icd.physician_diagnoses"
HOSP = "dataset.icd.hospital_diagnoses"

QUERY = {
    "type": "CONCEPT_QUERY",
    "root": {
        "type": "CONCEPT",
        "ids": ["dataset.icd.g00-g99.g20-g26.g20"],
        "tables": [
            {
                "id": AMB,
                "selects": [
                    f"{AMB}.icd_codes",
                    f"{AMB}.visit_count",
                    f"{AMB}.quarter_count",
                    f"{AMB}.physician_count",
                ],
                "dateColumn": "Quarter",
            },
            {
                "id": HOSP,
                "selects": [
                    f"{HOSP}.icd_codes",
                    f"{HOSP}.hospital_count",
                    f"{HOSP}.stay_length",
                ],
                "dateColumn": "Case begin",
            },
        ],
    },
}

GOLDEN = """result;dates;Outpatient ICD-Code;Number of physician visits;Number of quarters;Number of physicians visited;List of inpatient ICD-Codes;Number of hospitals visited;Length of hospital stays
1;{2015-07-16/2015-07-16, 2015-12-04/2015-12-04};-;-;-;-;[G2090, G2000];2;10
2;{2015-01-01/2015-12-31};[G2090];11;4;3;-;-;-
3;{2015-07-01/2015-12-31};[G2090];2;2;1;-;-;-
4;{2015-01-01/2015-12-31};[G2090, G2010];12;4;3;[G2090];1;4
5;{2015-02-05/2015-02-05, 2015-02-10/2015-02-10};-;-;-;-;[G2010];2;8
6;{2015-04-01/2015-12-31};[G2090, G2010];4;3;2;-;-;-
7;{2015-01-01/2015-03-31, 2015-09-18/2015-09-18};[G2090, G2000];2;2;2;[G2090];1;10
8;{2015-01-01/2015-12-31};[G2090, G201];9;4;5;[G2010, G2020];2;33
9;{2015-01-01/2015-12-31};[G2090];5;4;2;-;-;-
10;{2015-01-01/2015-12-31};[G2090];9;4;3;[G2090];1;4
11;{2015-01-01/2015-12-31};[G2090, G2000, G2010];11;4;4;[G2010];1;-
"""


def write_csv(path, headers, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=";", lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)


def main():
    os.makedirs(OUT, exist_ok=True)
    write_csv(os.path.join(OUT, "outpatient.csv"), OUTPATIENT_HEADERS, outpatient_rows())
    write_csv(os.path.join(OUT, "hospital.csv"), HOSPITAL_HEADERS, hospital_rows())
    for name, doc in (
        ("dataset.json", dataset_config_document()),
        ("outpatient.import.json", OUTPATIENT_DESCRIPTOR),
        ("hospital.import.json", HOSPITAL_DESCRIPTOR),
        ("query.json", QUERY),
    ):
        with open(os.path.join(OUT, name), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    with open(os.path.join(OUT, "golden.csv"), "wb") as fh:
        fh.write(GOLDEN.encode("utf-8"))
    print(f"fixture written to {OUT}")


if __name__ == "__main__":
    main()
