"""Preprocessing: validation, normalization, container round-trip, reports."""

import glob
import json
import os
import subprocess
import sys

import pytest

from cohortq.container import read_container, write_container, schema_hash
from cohortq.columns import TableSchema
from cohortq.errors import IngestError
from cohortq.ingest import ImportDescriptor, preprocess, validate
from cohortq.store import DataStore
from cohortq.synth import demo_registry

DESCRIPTOR = {
    "table": "hospital_diagnosis",
    "label": "t1",
    "entityColumn": "pid",
    "columns": [
        {"source": "icd", "target": "icd_code", "stripDots": True},
        {"source": "kind", "target": "kind"},
        {"source": "case", "target": "case_id"},
        {"source": "hospital", "target": "hospital_id"},
        {"source": "begin", "target": "case_begin"},
        {"source": "end", "target": "case_end"},
        {"sourceMin": "rb", "sourceMax": "re", "target": "case_range"},
        {"source": "stay", "target": "stay_day"},
        {"source": "cost", "target": "cost"},
    ],
}

HEADER = "pid;icd;kind;case;hospital;begin;end;rb;re;stay;cost"


def write_input(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(HEADER + "\n")
        for r in rows:
            fh.write(r + "\n")


GOOD_ROWS = [
    "p1;G20.11;primary;c1;h1;2015-01-01;2015-01-05;2015-01-01;2015-01-05;2015-01-02;1200.50",
    "p1;A00;secondary;c1;h1;2015-01-01;2015-01-05;;2015-01-05;;0.00",
    "p2;G25;initial;c2;h2;2015-03-01;;;;2015-03-01;99.99",
]


@pytest.fixture()
def schema():
    return demo_registry().schemas["hospital_diagnosis"]


def test_three_row_sample(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    descriptor = ImportDescriptor.from_document(DESCRIPTOR)
    report = preprocess(descriptor, schema, str(src), str(tmp_path / "out"), bucket_count=1)
    assert report.rows == 3
    assert report.skipped == 0
    assert report.buckets == 1  # one bucket holds all entities
    files = glob.glob(str(tmp_path / "out" / "*.cqimport"))
    assert len(files) == 1

    bucket, stats = read_container(open(files[0], "rb").read(), schema)
    assert bucket.row_count == 3
    # dot-stripping applied during preprocessing
    assert bucket.blocks["icd_code"].read(0) == "G2011"
    # open/missing range sides survive the round trip
    assert bucket.blocks["case_range"].read(1) == (None, __import__("datetime").date(2015, 1, 5))
    assert bucket.blocks["case_range"].read(2) is None
    assert bucket.blocks["case_end"].read(2) is None


def test_round_trip_preserves_order_and_values(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    descriptor = ImportDescriptor.from_document(DESCRIPTOR)
    preprocess(descriptor, schema, str(src), str(tmp_path / "out"), bucket_count=3)
    store = DataStore(demo_registry())
    for f in sorted(glob.glob(str(tmp_path / "out" / "*.cqimport"))):
        bucket, _ = read_container(open(f, "rb").read(), schema)
        store.add_bucket(bucket)
    rng = store.by_bucket
    p1 = next(
        imp for imps in rng.values() for imp in imps if "p1" in imp.bucket.entity_index
    )
    s, e = p1.bucket.entity_index["p1"]
    codes = [p1.bucket.blocks["icd_code"].read(i) for i in range(s, e)]
    assert codes == ["G2011", "A00"]  # input order within the entity


def test_deterministic_output(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    descriptor = ImportDescriptor.from_document(DESCRIPTOR)
    preprocess(descriptor, schema, str(src), str(tmp_path / "a"), bucket_count=5)
    preprocess(descriptor, schema, str(src), str(tmp_path / "b"), bucket_count=5)
    for fa in sorted(glob.glob(str(tmp_path / "a" / "*"))):
        fb = fa.replace("/a/", "/b/")
        assert open(fa, "rb").read() == open(fb, "rb").read()


def test_malformed_date_skip_and_fail_modes(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS + ["p3;G20;primary;c3;h1;not-a-date;;;;;1.00"])
    descriptor = ImportDescriptor.from_document(DESCRIPTOR)
    with pytest.raises(IngestError, match="line 5"):
        preprocess(descriptor, schema, str(src), str(tmp_path / "out"), on_error="fail")
    report = preprocess(
        descriptor, schema, str(src), str(tmp_path / "out2"), on_error="skip", bucket_count=1
    )
    assert report.rows == 3
    assert report.skipped == 1
    assert any("line 5" in e for e in report.errors)


def test_validate_reports_unknown_header(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    doc = json.loads(json.dumps(DESCRIPTOR))
    doc["columns"][0]["source"] = "icd_code_misspelled"
    with pytest.raises(IngestError, match="icd_code_misspelled"):
        validate(ImportDescriptor.from_document(doc), schema, str(src))


def test_validate_normalization_preview(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    report = validate(ImportDescriptor.from_document(DESCRIPTOR), schema, str(src))
    assert report.errors == []
    assert {"raw": "G20.11", "normalized": "G2011"} in report.normalized_previews


def test_unmapped_column_rejected(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    doc = json.loads(json.dumps(DESCRIPTOR))
    del doc["columns"][1]  # kind not mapped
    with pytest.raises(IngestError, match="'kind' is not mapped"):
        validate(ImportDescriptor.from_document(doc), schema, str(src))


def test_delimiter_autodetect_and_decimal_separator(tmp_path, schema):
    src = tmp_path / "in.csv"
    with open(src, "w") as fh:
        fh.write(HEADER.replace(";", "\t") + "\n")
        fh.write(
            "p1\tG20\tprimary\tc1\th1\t2015-01-01\t\t\t\t\t1200,50\n"
        )
    doc = json.loads(json.dumps(DESCRIPTOR))
    doc["decimalSeparator"] = ","
    report = preprocess(
        ImportDescriptor.from_document(doc), schema, str(src), str(tmp_path / "out"),
        bucket_count=1,
    )
    assert report.rows == 1
    f = glob.glob(str(tmp_path / "out" / "*.cqimport"))[0]
    bucket, _ = read_container(open(f, "rb").read(), schema)
    from decimal import Decimal

    assert bucket.blocks["cost"].read(0) == Decimal("1200.50")


def test_schema_mismatch_detected(tmp_path, schema):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    descriptor = ImportDescriptor.from_document(DESCRIPTOR)
    preprocess(descriptor, schema, str(src), str(tmp_path / "out"), bucket_count=1)
    f = glob.glob(str(tmp_path / "out" / "*.cqimport"))[0]
    other = TableSchema.from_document(
        {"name": "hospital_diagnosis", "columns": [{"name": "icd_code", "type": "STRING"}]}
    )
    assert schema_hash(other) != schema_hash(schema)
    with pytest.raises(ValueError, match="schema mismatch"):
        read_container(open(f, "rb").read(), other)


def test_cli_exit_codes(tmp_path):
    src = tmp_path / "in.csv"
    write_input(src, GOOD_ROWS)
    desc_path = tmp_path / "desc.json"
    desc_path.write_text(json.dumps(DESCRIPTOR))
    cfg_path = tmp_path / "dataset.json"
    from cohortq.synth import dataset_config_document

    cfg_path.write_text(json.dumps(dataset_config_document()))

    def run(*args):
        return subprocess.run(
            [sys.executable, "-m", "cohortq.cli"] + list(args),
            capture_output=True,
            text=True,
        )

    ok = run(
        "ingest", "preprocess", "--descriptor", str(desc_path), "--input", str(src),
        "--out", str(tmp_path / "out"), "--dataset-config", str(cfg_path),
    )
    assert ok.returncode == 0, ok.stderr
    assert "reduction" in ok.stdout

    bad_desc = tmp_path / "bad.json"
    doc = json.loads(json.dumps(DESCRIPTOR))
    doc["columns"][0]["source"] = "nope"
    bad_desc.write_text(json.dumps(doc))
    bad = run(
        "ingest", "preprocess", "--descriptor", str(bad_desc), "--input", str(src),
        "--out", str(tmp_path / "out2"), "--dataset-config", str(cfg_path),
    )
    assert bad.returncode == 1

    io_err = run(
        "ingest", "validate", "--descriptor", str(desc_path), "--input",
        str(tmp_path / "missing.csv"), "--dataset-config", str(cfg_path),
    )
    assert io_err.returncode == 2
