"""Engine vs brute-force oracle on random datasets and queries, plus the
engine's algebraic guarantees (monotonicity, De Morgan, skip soundness,
restriction pushdown)."""

import random

import pytest

from cohortq.errors import ValidationError
from cohortq.querymodel import parse_query

from fixtures_common import (
    claims_registry,
    engine_multiset,
    load_store,
    oracle_multiset,
    run_engine,
    split_view,
)
from generators import gen_dataset, gen_membership, gen_query_doc
from oracle import Oracle, from_epoch_ranges

BUCKETS = 7


@pytest.fixture(scope="module")
def registry():
    return claims_registry()


def make_pair(registry, rng, splits=1, max_entities=60):
    tables = gen_dataset(rng, max_entities=max_entities, max_events=800)
    store = load_store(registry, tables, BUCKETS, import_splits=splits)
    members = {"saved-1": gen_membership(rng, tables)}
    oracle = Oracle(
        registry,
        split_view(tables, splits),
        {eid: {e: from_epoch_ranges(r) for e, r in t.items()} for eid, t in members.items()},
    )
    return tables, store, members, oracle


def run_both(registry, store, oracle, members, doc, pool_size=1, no_skip=False):
    ast_e = parse_query(doc, registry)
    ast_o = parse_query(doc, registry)
    lines = run_engine(
        registry, store, ast_e, BUCKETS, members, pool_size=pool_size, no_skip=no_skip
    )
    expected = oracle.execute(ast_o)
    return engine_multiset(lines), oracle_multiset(expected)


def test_random_equivalence_single_import(registry):
    rng = random.Random(101)
    for ds in range(6):
        tables, store, members, oracle = make_pair(registry, rng)
        for q in range(25):
            doc = gen_query_doc(rng, ["saved-1"])
            got, want = run_both(registry, store, oracle, members, doc)
            assert got == want, f"dataset {ds} query {q}: {doc}"


def test_random_equivalence_multi_import(registry):
    rng = random.Random(202)
    for ds in range(3):
        tables, store, members, oracle = make_pair(registry, rng, splits=2)
        for q in range(15):
            doc = gen_query_doc(rng, ["saved-1"])
            got, want = run_both(registry, store, oracle, members, doc)
            assert got == want, f"dataset {ds} query {q}: {doc}"


def test_pool_size_determinism(registry):
    rng = random.Random(303)
    tables, store, members, oracle = make_pair(registry, rng, max_entities=120)
    for q in range(8):
        doc = gen_query_doc(rng, ["saved-1"])
        ast = parse_query(doc, registry)
        one = engine_multiset(run_engine(registry, store, ast, BUCKETS, members, pool_size=1))
        eight = engine_multiset(run_engine(registry, store, ast, BUCKETS, members, pool_size=8))
        assert one == eight


def test_skip_soundness(registry):
    rng = random.Random(404)
    tables, store, members, oracle = make_pair(registry, rng, max_entities=80)
    for q in range(20):
        doc = gen_query_doc(rng, ["saved-1"])
        ast = parse_query(doc, registry)
        with_skip = engine_multiset(run_engine(registry, store, ast, BUCKETS, members))
        without = engine_multiset(
            run_engine(registry, store, ast, BUCKETS, members, no_skip=True)
        )
        assert with_skip == without


def _entities(multiset):
    return {key[0] for key in multiset}


def test_monotonicity(registry):
    """Adding an OR branch never removes an entity; adding an AND branch
    never adds one."""
    rng = random.Random(505)
    tables, store, members, oracle = make_pair(registry, rng)
    for _ in range(15):
        base = gen_query_doc(rng)
        extra = gen_query_doc(rng)
        if "secondaryKey" in base or "secondaryKey" in extra:
            continue
        base_set = _entities(
            engine_multiset(run_engine(registry, store, parse_query(base, registry), BUCKETS))
        )
        or_doc = {
            "type": "CONCEPT_QUERY",
            "root": {"type": "OR", "children": [base["root"], extra["root"]]},
        }
        and_doc = {
            "type": "CONCEPT_QUERY",
            "root": {"type": "AND", "children": [base["root"], extra["root"]]},
        }
        or_set = _entities(
            engine_multiset(run_engine(registry, store, parse_query(or_doc, registry), BUCKETS))
        )
        and_set = _entities(
            engine_multiset(run_engine(registry, store, parse_query(and_doc, registry), BUCKETS))
        )
        assert base_set <= or_set
        assert and_set <= base_set


def test_de_morgan(registry):
    """NEGATION(AND(a,b)) selects the same entities as OR(NEG(a), NEG(b))."""
    rng = random.Random(606)
    tables, store, members, oracle = make_pair(registry, rng)
    for _ in range(10):
        a = gen_query_doc(rng)["root"]
        b = gen_query_doc(rng)["root"]
        neg_and = {
            "type": "CONCEPT_QUERY",
            "root": {"type": "NEGATION", "child": {"type": "AND", "children": [a, b]}},
        }
        or_negs = {
            "type": "CONCEPT_QUERY",
            "root": {
                "type": "OR",
                "children": [
                    {"type": "NEGATION", "child": a},
                    {"type": "NEGATION", "child": b},
                ],
            },
        }
        left = _entities(
            engine_multiset(run_engine(registry, store, parse_query(neg_and, registry), BUCKETS))
        )
        right = _entities(
            engine_multiset(run_engine(registry, store, parse_query(or_negs, registry), BUCKETS))
        )
        assert left == right


def test_restriction_pushdown_equivalence(registry):
    """DATE_RESTRICTION(OR(a, b)) == OR under the same restriction applied to
    each branch: masks pushed to the scans give the same result."""
    rng = random.Random(707)
    tables, store, members, oracle = make_pair(registry, rng)
    for _ in range(10):
        a = gen_query_doc(rng)["root"]
        b = gen_query_doc(rng)["root"]
        window = {"min": "2014-03-01", "max": "2016-08-15"}
        outer = {
            "type": "CONCEPT_QUERY",
            "root": {
                "type": "DATE_RESTRICTION",
                "dateRange": window,
                "child": {"type": "OR", "children": [a, b]},
            },
        }
        inner = {
            "type": "CONCEPT_QUERY",
            "root": {
                "type": "OR",
                "children": [
                    {"type": "DATE_RESTRICTION", "dateRange": window, "child": a},
                    {"type": "DATE_RESTRICTION", "dateRange": window, "child": b},
                ],
            },
        }
        left = engine_multiset(run_engine(registry, store, parse_query(outer, registry), BUCKETS))
        right = engine_multiset(run_engine(registry, store, parse_query(inner, registry), BUCKETS))
        assert left == right


def test_evaluate_entity_matches_bucket_path(registry):
    from cohortq.engine import EvalContext, build_plan, evaluate_entity

    rng = random.Random(808)
    tables, store, members, oracle = make_pair(registry, rng)
    entities = sorted(set(tables["outpatient_diagnosis"]) | set(tables["hospital_diagnosis"]))
    for q in range(10):
        doc = gen_query_doc(rng)
        ast = parse_query(doc, registry)
        all_lines = run_engine(registry, store, ast, BUCKETS)
        by_entity = {}
        for ln in all_lines:
            by_entity.setdefault(ln.entity, []).append(ln)
        plan = build_plan(ast, registry, {})
        for e in entities[:30]:
            ctx = EvalContext(plan, store, BUCKETS)
            single = evaluate_entity(ctx, e)
            assert engine_multiset(single) == engine_multiset(by_entity.get(e, []))


def test_zero_event_entity_yields_no_line(registry):
    store = load_store(registry, {"outpatient_diagnosis": {}, "hospital_diagnosis": {}}, BUCKETS)
    doc = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.g00-g99"],
            "tables": [{"id": "dataset.icd.physician_diagnoses"}],
        },
    }
    lines = run_engine(registry, store, parse_query(doc, registry), BUCKETS)
    assert lines == []


def test_unknown_ids_rejected(registry):
    doc = {
        "type": "CONCEPT_QUERY",
        "root": {
            "type": "CONCEPT",
            "ids": ["dataset.icd.nope"],
            "tables": [{"id": "dataset.icd.physician_diagnoses"}],
        },
    }
    with pytest.raises(ValidationError):
        parse_query(doc, registry)
