import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from spectralclone.errors import DanglingReference, InvalidParameter, MalformedJson, SchemaViolation
from spectralclone.features import (
    generate_synthetic_program,
    parse_feature_file,
    perturb_program,
    serialize_features,
)


def encode(doc):
    return json.dumps(doc).encode()


def test_minimal_file(minimal_doc):
    p = parse_feature_file(encode(minimal_doc))
    assert p.program_id == "tiny"
    assert p.call_graph.edges == ()
    assert [(f.node_id, f.cfg_edge_count) for f in p.functions] == [(0, 0)]
    assert p.mnemonics is None and p.strings is None


def test_cfg_edges_are_deduplicated(minimal_doc):
    minimal_doc["functions"] = [{"node_id": 0, "cfg_edges": [[0, 1], [0, 1], [1, 2]]}]
    p = parse_feature_file(encode(minimal_doc))
    assert p.functions[0].cfg_edge_count == 2


def test_function_on_missing_node(minimal_doc):
    minimal_doc["functions"] = [{"node_id": 99, "cfg_edge_count": 1}]
    with pytest.raises(DanglingReference) as info:
        parse_feature_file(encode(minimal_doc))
    assert info.value.node_id == 99


def test_edge_on_missing_node(minimal_doc):
    minimal_doc["call_graph"]["edges"] = [[0, 5]]
    with pytest.raises(DanglingReference):
        parse_feature_file(encode(minimal_doc))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(extra=1), "$"),
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(program_id=""), "program_id"),
    (lambda d: d.update(file_size_bytes=-1), "$.file_size_bytes"),
    (lambda d: d.update(disasm_size_bytes=True), "$.disasm_size_bytes"),
    (lambda d: d.pop("functions"), "$"),
    (lambda d: d["functions"][0].update(cfg_edges=[]), "functions[0]"),
    (lambda d: d["functions"][0].pop("cfg_edge_count"), "functions[0]"),
    (lambda d: d["call_graph"]["nodes"].append({"id": 0, "kind": "local"}), "call_graph.nodes[1].id"),
    (lambda d: d["call_graph"]["nodes"][0].update(kind="weird"), "call_graph.nodes[0].kind"),
    (lambda d: d.update(strings="abc"), "strings"),
])
def test_schema_violations(minimal_doc, mutate, where):
    mutate(minimal_doc)
    with pytest.raises(SchemaViolation) as info:
        parse_feature_file(encode(minimal_doc))
    assert info.value.path == where


def test_external_nodes_cannot_call(minimal_doc):
    minimal_doc["call_graph"] = {
        "nodes": [{"id": 0, "kind": "local"}, {"id": 1, "kind": "external", "name": "puts"}],
        "edges": [[1, 0]],
    }
    with pytest.raises(SchemaViolation):
        parse_feature_file(encode(minimal_doc))


def test_function_on_external_node(minimal_doc):
    minimal_doc["call_graph"]["nodes"].append({"id": 1, "kind": "external"})
    minimal_doc["functions"].append({"node_id": 1, "cfg_edge_count": 3})
    with pytest.raises(SchemaViolation):
        parse_feature_file(encode(minimal_doc))


@pytest.mark.parametrize("data", [b"{", b"\xff\xfe", b"[1, 2"])
def test_malformed_json(data):
    with pytest.raises(MalformedJson):
        parse_feature_file(data)


def test_external_names_derived_from_nodes(minimal_doc):
    minimal_doc["call_graph"] = {
        "nodes": [{"id": 0, "kind": "local"}, {"id": 1, "kind": "external", "name": "mempcpy"},
                  {"id": 2, "kind": "external"}],
        "edges": [[0, 1]],
    }
    p = parse_feature_file(encode(minimal_doc))
    assert p.resolved_external_names() == {"mempcpy"}
    minimal_doc["external_names"] = ["printf"]
    assert parse_feature_file(encode(minimal_doc)).resolved_external_names() == {"printf"}


def test_canonical_serialization_sorts_keys(small_program):
    text = serialize_features(small_program).decode()
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert text == json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60), degree=st.floats(0.1, 6.0))
def test_round_trip(seed, n, degree):
    p = generate_synthetic_program(seed, n, degree)
    assert parse_feature_file(serialize_features(p)) == p


def test_generator_single_function():
    p = generate_synthetic_program(7, 1, 1.0)
    assert len(p.call_graph.local_ids()) == 1
    assert len(p.functions) == 1


def test_generator_is_deterministic():
    a = generate_synthetic_program(7, 100, 3.0)
    b = generate_synthetic_program(7, 100, 3.0)
    assert serialize_features(a) == serialize_features(b)


def test_generator_depends_on_seed():
    a = generate_synthetic_program(7, 100, 3.0)
    b = generate_synthetic_program(8, 100, 3.0)
    assert set(a.call_graph.edges) != set(b.call_graph.edges)


def test_generator_shape():
    p = generate_synthetic_program(3, 200, 3.0)
    locals_ = p.call_graph.local_ids()
    assert locals_ == list(range(200))
    assert all(u != v for u, v in p.call_graph.edges)
    assert len(set(p.call_graph.edges)) == len(p.call_graph.edges)
    out_degree = len(p.call_graph.edges) / 200
    assert 2.0 < out_degree < 4.0
    assert p.mnemonics and p.strings


@pytest.mark.parametrize("n, d", [(0, 1.0), (5, 0.0), (5, -1.0), (5, float("nan"))])
def test_generator_rejects_bad_parameters(n, d):
    with pytest.raises(InvalidParameter):
        generate_synthetic_program(1, n, d)


def test_zero_perturbation_only_renames(small_program):
    clone = perturb_program(small_program, 3, 0.0, 0.0)
    assert clone.program_id != small_program.program_id
    assert clone.program_id.startswith(small_program.program_id)
    assert clone == replace(small_program, program_id=clone.program_id)


def test_edge_edit_bound():
    doc = {
        "schema_version": 1, "program_id": "ten", "file_size_bytes": 1, "disasm_size_bytes": 1,
        "call_graph": {
            "nodes": [{"id": i, "kind": "local"} for i in range(6)],
            "edges": [[i, (i + 1) % 6] for i in range(6)] + [[0, 2], [0, 3], [1, 4], [2, 5]],
        },
        "functions": [{"node_id": i, "cfg_edge_count": i} for i in range(6)],
    }
    p = parse_feature_file(encode(doc))
    assert len(p.call_graph.edges) == 10
    for seed in range(20):
        clone = perturb_program(p, seed, 1.0, 0.0)
        before, after = set(p.call_graph.edges), set(clone.call_graph.edges)
        assert len(before ^ after) <= 10


def test_cfg_jitter_bounds(small_program):
    clone = perturb_program(small_program, 5, 0.0, 0.1)
    for f0, f1 in zip(small_program.functions, clone.functions):
        assert abs(f1.cfg_edge_count - f0.cfg_edge_count) <= 0.1 * f0.cfg_edge_count + 0.5


def test_perturb_is_deterministic(small_program):
    assert perturb_program(small_program, 9, 0.05, 0.1) == perturb_program(small_program, 9, 0.05, 0.1)


@pytest.mark.parametrize("rates", [(-0.1, 0.0), (0.0, 1.5)])
def test_perturb_rejects_bad_rates(small_program, rates):
    with pytest.raises(InvalidParameter):
        perturb_program(small_program, 1, *rates)
