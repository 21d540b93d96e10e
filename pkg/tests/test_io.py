import json

import numpy as np
import pytest

from fuzzytime.io import (
    NotFound,
    ValidationError,
    ensemble_from_table,
    function_from_dict,
    function_to_dict,
    infer_grid,
    read_ensemble_table,
    read_task_document,
    solver_config_from_dict,
    task_from_document,
)
from fuzzytime.model import Bell, SampledFunction, SamplingGrid, Trapezoid, transform
from fuzzytime.nlparse import NoTemporalModifier
from fuzzytime.synth import STUDY_GRID, SynthConfig, generate, write_csv


@pytest.mark.parametrize(
    "fn",
    [
        Trapezoid(0, 10, 20, 30),
        Bell(300, 40),
        SampledFunction(SamplingGrid(0, 30, 0.1), [0.0, 0.5, 1.0]),
        transform(Trapezoid(540, 570, 630, 660), 0.5, 0, 600),
    ],
)
def test_function_round_trip(fn):
    spec = json.loads(json.dumps(function_to_dict(fn)))
    back = function_from_dict(spec)
    t = np.linspace(0, 1000, 101)
    assert np.array_equal(back(t), fn(t))


@pytest.mark.parametrize(
    "spec", [{"type": "blob"}, {"type": "trapezoid", "a": 1}, {"type": "bell", "mu": 0, "sigma": 0}]
)
def test_bad_function_specs(spec):
    with pytest.raises(ValidationError):
        function_from_dict(spec)


def test_task_document_with_instructions():
    doc = {
        "skills": [
            {"id": "boil", "instruction": "Boil water in 10 minutes", "duration_s": 120},
            {"id": "wipe", "duration_s": 60, "satisfaction": {"type": "bell", "mu": 60, "sigma": 30}},
        ],
        "solver": {"epsilon": 1e-5, "grid": {"end": 1200}},
    }
    task, solver = task_from_document(doc)
    assert task.ids == ["boil", "wipe"]
    assert task.skills[0].psi == Trapezoid(450, 540, 660, 750)
    cfg = solver_config_from_dict(solver)
    assert cfg.epsilon == 1e-5 and cfg.grid.end == 1200 and cfg.grid.rate == 1 / 60


@pytest.mark.parametrize(
    "doc",
    [
        {},
        {"skills": [{"id": "a"}]},
        {"skills": [{"id": "a", "duration_s": 5}]},
        {"skills": [{"id": "a", "duration_s": 5, "instruction": "now"},
                    {"id": "a", "duration_s": 5, "instruction": "now"}]},
        {"skills": [{"id": "a", "duration_s": -5, "instruction": "now"}]},
        {"skills": [{"id": "a", "duration_s": 5, "instruction": "now"}], "solver": []},
    ],
)
def test_invalid_task_documents(doc):
    with pytest.raises(ValidationError):
        task_from_document(doc)


def test_instruction_without_time_propagates():
    with pytest.raises(NoTemporalModifier):
        task_from_document({"skills": [{"id": "a", "duration_s": 5, "instruction": "Wipe."}]})


def test_unknown_solver_keys():
    with pytest.raises(ValidationError):
        solver_config_from_dict({"temperature": 3})
    with pytest.raises(ValidationError):
        solver_config_from_dict({"restarts": 0})


def test_bad_json(tmp_path):
    p = tmp_path / "t.json"
    p.write_text("{nope")
    with pytest.raises(ValidationError):
        read_task_document(p)


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    path = tmp_path_factory.mktemp("synth") / "s.csv"
    with path.open("w") as fh:
        write_csv(SynthConfig(participants=4, seed=2), fh)
    return read_ensemble_table(path)


def test_ensemble_matches_generator(table):
    drawn = [v for pid, tag, g, v in generate(SynthConfig(participants=4, seed=2)) if tag == "in_10min"]
    e = ensemble_from_table(table, "in_10min")
    assert e.grid == STUDY_GRID
    np.testing.assert_allclose(e.matrix(), np.vstack(drawn), atol=5e-7)
    assert len(ensemble_from_table(table, "in_10min", "robot")) == 2


def test_unknown_tag_or_group(table):
    with pytest.raises(NotFound):
        ensemble_from_table(table, "nope")
    with pytest.raises(NotFound):
        ensemble_from_table(table[table["group"] == "robot"], "in_now", "person")


def test_table_validation(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("participant_id,instruction_tag,group,time_s,satisfaction\np1,x,robot,0,1.5\n")
    with pytest.raises(ValidationError):
        read_ensemble_table(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        read_ensemble_table(p)
    p.write_text("participant_id,instruction_tag,group,time_s,satisfaction\np1,x,alien,0,0.5\n")
    with pytest.raises(ValidationError):
        read_ensemble_table(p)


def test_infer_grid():
    assert infer_grid(STUDY_GRID.times()) == STUDY_GRID
    with pytest.raises(ValidationError):
        infer_grid(np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ValidationError):
        infer_grid(np.array([0.0]))
