"""HTTP surface: submission, polling, CSV download, history durability and
the committed golden file."""

import glob
import json
import os

import pytest
from fastapi.testclient import TestClient

from cohortq.api import QueryService, create_app
from cohortq.config import ServiceConfig
from cohortq.ingest import ImportDescriptor, preprocess
from cohortq.synth import demo_registry

FIXTURE = os.path.join(os.path.dirname(__file__), "fixtures", "parkinson")


@pytest.fixture(scope="module")
def import_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("imports")
    registry = demo_registry()
    for src, desc in (
        ("outpatient.csv", "outpatient.import.json"),
        ("hospital.csv", "hospital.import.json"),
    ):
        d = ImportDescriptor.load(os.path.join(FIXTURE, desc))
        preprocess(
            d,
            registry.schemas[d.table],
            os.path.join(FIXTURE, src),
            str(out),
            bucket_count=20,
            compare_gzip=False,
        )
    return str(out)


def make_service(data_dir: str, import_dir: str) -> QueryService:
    cfg = ServiceConfig(
        import_dir=import_dir,
        data_dir=data_dir,
        bucket_count=20,
        workers=1,
        pool_size=2,
    )
    return QueryService(demo_registry(), cfg)


@pytest.fixture()
def client(tmp_path, import_dir):
    service = make_service(str(tmp_path / "data"), import_dir)
    with TestClient(create_app(service)) as c:
        c.service = service
        yield c


def wait_done(client, execution_id, tries=400):
    import time

    for _ in range(tries):
        body = client.get(f"/api/queries/{execution_id}").json()
        if body["state"] in ("DONE", "FAILED", "CANCELED"):
            return body
        time.sleep(0.025)
    raise TimeoutError("query never finished")


def parkinson_query() -> dict:
    with open(os.path.join(FIXTURE, "query.json")) as fh:
        return json.load(fh)


def test_concepts_document(client):
    doc = client.get("/api/concepts").json()
    assert doc["dataset"] == "dataset"
    tree = doc["concepts"][0]
    root = tree["root"]
    assert root["id"] == "dataset.icd"
    # the g20_11 node with its description is reachable
    def find(node, suffix):
        if node["id"].endswith(suffix):
            return node
        for c in node["children"]:
            got = find(c, suffix)
            if got:
                return got
        return None

    node = find(root, "g20_1.g20_11")
    assert node is not None
    connectors = {c["name"]: c for c in tree["connectors"]}
    hosp = connectors["hospital_diagnoses"]
    assert {f["name"] for f in hosp["filters"]} >= {"diagnosis_kind", "case_number"}
    assert any(s["name"] == "number_of_cases" for s in hosp["selects"])
    # deterministic: a second request returns the identical document
    assert client.get("/api/concepts").json() == doc


def test_golden_csv_through_http(client):
    r = client.post("/api/queries", json=parkinson_query())
    assert r.status_code == 200, r.text
    eid = r.json()["executionId"]
    body = wait_done(client, eid)
    assert body["state"] == "DONE"
    assert body["lineCount"] == 11
    csv = client.get(f"/api/queries/{eid}/result.csv")
    assert csv.status_code == 200
    with open(os.path.join(FIXTURE, "golden.csv"), "rb") as fh:
        golden = fh.read()
    assert csv.content == golden


def test_malformed_document_lists_violations(client):
    bad = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [
                {
                    "id": "dataset.icd.physician_diagnoses",
                    "filters": [{"filter": "dataset.icd.physician_diagnoses.nope", "value": "x"}],
                }
            ],
        },
    }
    r = client.post("/api/queries", json=bad)
    assert r.status_code == 400
    assert any("unknown filter id" in v for v in r.json()["violations"])


def test_result_codes(client):
    r = client.get("/api/queries/doesnotexist")
    assert r.status_code == 404
    r = client.get("/api/queries/doesnotexist/result.csv")
    assert r.status_code == 404

    eid = client.post("/api/queries", json=parkinson_query()).json()["executionId"]
    wait_done(client, eid)
    # polling stability: identical bodies on repeated GETs of a terminal execution
    b1 = client.get(f"/api/queries/{eid}").json()
    b2 = client.get(f"/api/queries/{eid}").json()
    assert b1 == b2
    c1 = client.get(f"/api/queries/{eid}/result.csv").content
    c2 = client.get(f"/api/queries/{eid}/result.csv").content
    assert c1 == c2


def test_saved_query_flow(client):
    eid = client.post("/api/queries", json=parkinson_query()).json()["executionId"]
    wait_done(client, eid)

    # a saved query referencing the DONE execution is accepted
    follow = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "AND",
            "children": [
                {"type": "SAVED_QUERY", "query": eid},
                {
                    "type": "CONCEPT",
                    "ids": ["dataset.icd.g00-g99.g20-g26.g20"],
                    "tables": [{"id": "dataset.icd.hospital_diagnoses"}],
                },
            ],
        },
    }
    r = client.post("/api/queries", json=follow)
    assert r.status_code == 200
    eid2 = r.json()["executionId"]
    body = wait_done(client, eid2)
    assert body["state"] == "DONE"
    # entities that satisfied the base query AND have inpatient events
    csv = client.get(f"/api/queries/{eid2}/result.csv").text
    got_entities = [line.split(";")[0] for line in csv.strip().splitlines()[1:]]
    assert got_entities == ["1", "4", "5", "7", "8", "10", "11"]

    # referencing an unknown or non-DONE execution is a 400
    missing = dict(follow)
    missing["root"] = {"type": "SAVED_QUERY", "query": "nope"}
    r = client.post("/api/queries", json=missing)
    assert r.status_code == 400
    assert any("does not exist" in v for v in r.json()["violations"])


def test_history_owner_partition_and_delete(client):
    a = client.post("/api/queries", json=parkinson_query(), headers={"X-User": "alice"})
    eid = a.json()["executionId"]
    wait_done(client, eid)
    alice = client.get("/api/queries", headers={"X-User": "alice"}).json()
    bob = client.get("/api/queries", headers={"X-User": "bob"}).json()
    assert [e["executionId"] for e in alice] == [eid]
    assert bob == []

    r = client.patch(f"/api/queries/{eid}", json={"name": "parkinson cohort"})
    assert r.status_code == 200
    assert client.get("/api/queries", headers={"X-User": "alice"}).json()[0]["name"] == (
        "parkinson cohort"
    )

    assert client.delete(f"/api/queries/{eid}").status_code == 200
    assert client.get(f"/api/queries/{eid}").status_code == 404
    assert client.delete(f"/api/queries/{eid}").status_code == 404


def test_history_survives_restart(tmp_path, import_dir):
    data_dir = str(tmp_path / "data")
    service = make_service(data_dir, import_dir)
    with TestClient(create_app(service)) as client:
        eid = client.post("/api/queries", json=parkinson_query()).json()["executionId"]
        wait_done(client, eid)
        csv_before = client.get(f"/api/queries/{eid}/result.csv").content
        history_before = client.get("/api/queries").json()

    # brand-new service over the same data dir
    service2 = make_service(data_dir, import_dir)
    with TestClient(create_app(service2)) as client:
        history_after = client.get("/api/queries").json()
        assert history_after == history_before
        assert client.get(f"/api/queries/{eid}/result.csv").content == csv_before
        # and the persisted lines still feed SAVED_QUERY references
        follow = {
            "type": "CONCEPT_QUERY",
            "root": {"type": "SAVED_QUERY", "query": eid},
        }
        r = client.post("/api/queries", json=follow)
        assert r.status_code == 200
        body = wait_done(client, r.json()["executionId"])
        assert body["state"] == "DONE"
        assert body["lineCount"] == 11


def test_interrupted_executions_fail_on_restart(tmp_path, import_dir):
    data_dir = str(tmp_path / "data")
    service = make_service(data_dir, import_dir)
    os.makedirs(data_dir, exist_ok=True)
    record = {
        "id": "ghost",
        "owner": "anonymous",
        "doc": {},
        "name": "ghost",
        "createdAt": 0,
        "state": "RUNNING",
        "error": None,
        "lineCount": None,
    }
    with open(service.log_path, "a") as fh:
        fh.write(json.dumps(record) + "\n")
    service2 = make_service(data_dir, import_dir)
    with TestClient(create_app(service2)) as client:
        body = client.get("/api/queries/ghost").json()
        assert body["state"] == "FAILED"
        assert "restart" in body["error"]
        assert client.get("/api/queries/ghost/result.csv").status_code == 410
