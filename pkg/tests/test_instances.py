import json
import pytest
from fractions import Fraction

from welfare.coverage import CoverageInstance, random_coverage_instance
from welfare.exceptions import FixtureError, InstanceFormatError, ModelError
from welfare.fixtures import adverse_competition, counter1, counter3, symmetric_indifferent_model
from welfare.influence import OrModel
from welfare.instances import (
    instance_document, load_instance, load_table, parse_instance, resolve_instance, save_instance, save_table
)
from welfare.mechanisms import construct_distributions, construct_probability_table
from welfare.model import AdditiveModel, TabularModel, enumerate_profiles


# --- Helpers ---

ADDITIVE = {"model": "additive", "name": "pair", "ground": ["x", "y"], "values": [["1", "2"], ["3", "4"]]}

OR_GRAPH = {
    "model": "or_single_step",
    "players": 2,
    "epsilon": "1/100",
    "nodes": [{"id": "c1", "weight": "1/100"}, {"id": "u1", "weight": "1"}, {"id": "u2", "weight": "1"}],
    "edges": [{"from": "c1", "to": "u1", "p": "9/10"}],
}

TWO_PLAYER_TABLE = {
    "players": 2,
    "ground": ["x"],
    "entries": [
        {"profile": [[], []], "utilities": ["0", "0"]},
        {"profile": [["x"], []], "utilities": ["1", "0"]},
        {"profile": [[], ["x"]], "utilities": ["0", "1"]},
        {"profile": [["x"], ["x"]], "utilities": ["1/2", "1/2"]},
    ],
}


def assert_same_utilities(first, second):
    assert first.player_count == second.player_count
    assert first.labels == second.labels
    for sets in enumerate_profiles(first.player_count, first.ground_size, first.disjoint_only):
        assert first.utilities(sets) == second.utilities(sets)


# --- Parsing Tests ---

def test_parse_additive():
    model = parse_instance(json.dumps(ADDITIVE))
    assert isinstance(model, AdditiveModel)
    assert model.name == "pair"
    assert model.utilities([[0], [1]]) == (Fraction(1), Fraction(4))

def test_parse_table_without_model_field():
    model = parse_instance(json.dumps(TWO_PLAYER_TABLE))
    assert isinstance(model, TabularModel)
    assert model.labels == ("x",)
    assert model.utilities([[0], [0]]) == (Fraction(1, 2), Fraction(1, 2))

def test_parse_table_with_model_field():
    document = {
        "model": "tabular",
        "players": 1,
        "ground": ["a"],
        "entries": [
            {"profile": [[]], "utilities": ["0"]},
            {"profile": [["a"]], "utilities": ["1/2"]},
        ],
    }
    model = parse_instance(json.dumps(document))
    assert model.utilities([[0]]) == (Fraction(1, 2),)

def test_parse_or_graph():
    model = parse_instance(json.dumps(OR_GRAPH))
    assert isinstance(model, OrModel)
    assert model.candidates == ("c1",)
    assert model.epsilon == Fraction(1, 100)
    assert model.utilities([[0], []]) == (Fraction(1, 100) + Fraction(9, 10), Fraction(0))

def test_parse_or_graph_without_epsilon():
    document = {key: value for key, value in OR_GRAPH.items() if key != "epsilon"}
    assert parse_instance(json.dumps(document)).epsilon is None

def test_parse_coverage():
    document = {
        "model": "disk_coverage",
        "players": 2,
        "player_weights": ["2", "1"],
        "disks": ["D1", "D2"],
        "cells": [{"value": "3", "disks": ["D1"]}, {"value": "1/2", "disks": ["D1", "D2"]}],
    }
    model = parse_instance(json.dumps(document))
    assert isinstance(model, CoverageInstance)
    assert model.welfare([[0], [1]]) == Fraction(7, 2)
    assert model.utilities([[0], [1]]) == (3 + Fraction(1, 3), Fraction(1, 6))

def test_coverage_weights_default_to_player_count():
    document = {"model": "disk_coverage", "players": 3, "disks": ["D1"], "cells": [{"value": "1", "disks": ["D1"]}]}
    model = parse_instance(json.dumps(document))
    assert model.player_count == 3
    assert not model.weighted


# --- Diagnostics Tests ---

def test_syntax_error_reports_position():
    with pytest.raises(InstanceFormatError) as exc_info:
        parse_instance("{", "broken.json")
    assert exc_info.value.source == "broken.json"
    assert exc_info.value.diagnostics[0][0] == "line 1, column 2"

def test_schema_error_reports_field_path():
    document = {"model": "additive", "ground": ["x"]}
    with pytest.raises(InstanceFormatError) as exc_info:
        parse_instance(json.dumps(document))
    assert any(where.endswith("values") for where, _ in exc_info.value.diagnostics)

def test_edge_needs_from_and_to():
    document = dict(OR_GRAPH, edges=[{"source": "c1", "target": "u1", "p": "1/2"}])
    with pytest.raises(InstanceFormatError) as exc_info:
        parse_instance(json.dumps(document))
    assert any(where.endswith("from") for where, _ in exc_info.value.diagnostics)

def test_unknown_model():
    with pytest.raises(InstanceFormatError):
        parse_instance(json.dumps({"model": "graph"}))

def test_float_values_are_rejected():
    document = dict(ADDITIVE, values=[[0.5, 2], [3, 4]])
    with pytest.raises(InstanceFormatError, match="num/den"):
        parse_instance(json.dumps(document))

def test_unknown_element_in_tabular_entry():
    document = {"players": 1, "ground": ["a"], "entries": [{"profile": [["z"]], "utilities": ["1"]}]}
    with pytest.raises(InstanceFormatError, match="unknown element 'z'") as exc_info:
        parse_instance(json.dumps(document))
    assert exc_info.value.diagnostics[0][0] == "instance"

def test_coverage_player_count_mismatch():
    document = {
        "model": "disk_coverage", "players": 3, "player_weights": ["1", "1"],
        "disks": ["D1"], "cells": [{"value": "1", "disks": ["D1"]}],
    }
    with pytest.raises(InstanceFormatError, match="2 player_weights"):
        parse_instance(json.dumps(document))

def test_model_error_becomes_diagnostic():
    document = {"model": "disk_coverage", "disks": ["D1"], "cells": [{"value": "1", "disks": ["D9"]}]}
    with pytest.raises(InstanceFormatError, match="unknown disk 'D9'"):
        parse_instance(json.dumps(document))


# --- Export Tests ---

@pytest.mark.parametrize("build", [
    lambda: counter1(Fraction(1, 20)),
    lambda: counter3(),
    lambda: random_coverage_instance(disks=3, cells=5, rng_seed=2, weights=[2, 1]),
    lambda: adverse_competition(4),
    lambda: symmetric_indifferent_model([0, 3, 5, 6], players=3),
    lambda: AdditiveModel([[1, 2], [3, 4]], labels=["x", "y"]),
])
def test_saved_instance_loads_back(tmp_path, build):
    model = build()
    path = tmp_path / "instance.json"
    save_instance(model, path)
    assert_same_utilities(model, load_instance(path))

def test_exported_graph_uses_from_and_to():
    document = instance_document(counter1()).model_dump(mode="json", by_alias=True)
    assert document["model"] == "or_single_step"
    assert document["epsilon"] == "1/100"
    assert {"from": "c1", "to": "u1", "p": "1/1"} in document["edges"]

def test_exported_table_has_no_model_requirement():
    document = instance_document(adverse_competition()).model_dump(mode="json", by_alias=True)
    document.pop("model")
    assert isinstance(parse_instance(json.dumps(document)), TabularModel)

def test_estimated_model_cannot_be_exported():
    with pytest.raises(ModelError, match="only exact models"):
        instance_document(counter1().sampled(samples=10))


# --- File Tests ---

def test_load_instance_from_file(tmp_path):
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(ADDITIVE), encoding="utf-8")
    assert load_instance(path).labels == ("x", "y")
    assert resolve_instance(str(path)).name == "pair"

def test_missing_file():
    with pytest.raises(InstanceFormatError) as exc_info:
        load_instance("/nonexistent/instance.json")
    assert exc_info.value.diagnostics[0][0] == "file"

def test_resolve_fixture():
    model = resolve_instance("fixture:counter1", epsilon="1/20")
    assert model.name == "counter1"
    assert model.welfare([[0], []]) == 2 + Fraction(1, 20)

def test_resolve_unknown_fixture():
    with pytest.raises(FixtureError, match="unknown fixture"):
        resolve_instance("fixture:nope")


# --- Table File Tests ---

def test_save_and_load_table(tmp_path):
    model = counter1()
    table = construct_distributions(model, 2, 1)
    path = tmp_path / "table.json"
    save_table(table, path)
    assert json.loads(path.read_text())["kind"] == "M"
    loaded = load_table(model, path)
    assert loaded.w(2, 1) == table.w(2, 1)
    assert loaded.verify() == []

def test_load_table_rejects_probability_table(tmp_path):
    model = random_coverage_instance(disks=3, cells=4, rng_seed=0)
    path = tmp_path / "p.json"
    save_table(construct_probability_table(model, 1, 1), path)
    with pytest.raises(InstanceFormatError, match="expected a table M export"):
        load_table(model, path)

def test_load_table_rejects_garbage(tmp_path):
    path = tmp_path / "garbage.json"
    path.write_text("{}", encoding="utf-8")
    with pytest.raises(InstanceFormatError):
        load_table(counter1(), path)
