import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amscale.errors import EmptyInput, NoValidRespondents, ParseError
from amscale.placements import (
    IngestOptions,
    PlacementMatrix,
    complete_cases,
    design_matrix,
    load_csv,
    write_csv,
)
from amscale.simharness import SimConfig, generate


def _write(tmp_path, text, name="p.csv"):
    f = tmp_path / name
    f.write_text(text)
    return f


def test_load_single_row(tmp_path):
    p = load_csv(_write(tmp_path, "A,B,C\n1,2,3\n"))
    assert p.values.tolist() == [[1.0, 2.0, 3.0]]
    assert not p.missing.any()
    assert p.stimulus_labels == ("A", "B", "C")
    assert p.respondent_ids == ("1",)


def test_missing_tokens(tmp_path):
    p = load_csv(_write(tmp_path, "A,B,C\n1,NA,3\n4,,6\n"),
                 IngestOptions(missing_tokens={"NA", ""}))
    assert p.missing.tolist() == [[False, True, False], [False, True, False]]
    assert np.isnan(p.values[0, 1])


def test_id_and_self_columns(tmp_path):
    p = load_csv(_write(tmp_path, "who;A;B;C;me\nr1;1;2;3;2.5\nr2;3;2;1;NA\n"),
                 IngestOptions(id_column="who", self_column="me", delimiter=";"))
    assert p.respondent_ids == ("r1", "r2")
    assert p.stimulus_labels == ("A", "B", "C")
    assert p.self_placement[0] == 2.5 and np.isnan(p.self_placement[1])


@pytest.mark.parametrize("body", ["A,B\n1,x\n", "A,B\n1,2,3\n", "A,B\n1,inf\n", "A,B\n1,nan\n"])
def test_parse_errors(tmp_path, body):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, body))


def test_empty_input(tmp_path):
    with pytest.raises(EmptyInput):
        load_csv(_write(tmp_path, "A,B,C\n"))


def test_simulated_round_trip(tmp_path):
    sim = generate(SimConfig(seed=3, missing_rate=0.05))
    f = tmp_path / "sim.csv"
    write_csv(sim.placements, f)
    back = load_csv(f, IngestOptions(id_column="id", self_column="self"))
    assert back.values.shape == (500, 6)
    assert back.equals(sim.placements)


def test_complete_cases_identity():
    p = PlacementMatrix.from_array([[1, 2, 3], [3, 2, 1]])
    q, dropped = complete_cases(p)
    assert dropped == [] and q.equals(p)


def test_complete_cases_drops_row():
    p = PlacementMatrix.from_array([[1, 2, 3], [3, 2, 1], [1, np.nan, 2]])
    q, dropped = complete_cases(p)
    assert dropped == [2]
    assert q.respondent_ids == ("1", "2")


def test_complete_cases_all_missing():
    with pytest.raises(NoValidRespondents):
        complete_cases(PlacementMatrix.from_array([[1, np.nan], [np.nan, 2]]))


def test_complete_cases_matches_row_scan():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 6))
    X[rng.random((100, 6)) < 0.1] = np.nan
    p = PlacementMatrix.from_array(X)
    q, dropped = complete_cases(p)
    scan = [i for i in range(100) if any(np.isnan(X[i, j]) for j in range(6))]
    assert dropped == scan
    assert q.n == 100 - len(scan)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
def test_complete_cases_idempotent(seed, rate):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 4))
    X[rng.random((20, 4)) < rate] = np.nan
    X[0] = 1.0
    once, _ = complete_cases(PlacementMatrix.from_array(X))
    twice, dropped = complete_cases(once)
    assert dropped == [] and twice.equals(once)


def test_design_matrix():
    assert design_matrix([2, 5, 7]).tolist() == [[1, 2], [1, 5], [1, 7]]
    d = design_matrix([0, 0, 0])
    assert d.tolist() == [[1, 0], [1, 0], [1, 0]]
    assert np.linalg.matrix_rank(d) == 1


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=8))
def test_design_matrix_rank(xs):
    d = design_matrix(xs)
    assert np.array_equal(d[:, 0], np.ones(len(xs)))
    assert np.array_equal(d[:, 1], np.array(xs, dtype=float))
    assert (np.linalg.matrix_rank(d) == 2) == (len(set(xs)) >= 2)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        PlacementMatrix(np.ones((2, 2)), np.zeros((2, 2), bool), ("a", "a"), ("1", "2"))
    with pytest.raises(ValueError):
        PlacementMatrix(np.ones((2, 2)), np.zeros((2, 2), bool), ("a", "b"), ("1", "1"))
    with pytest.raises(ValueError):
        PlacementMatrix(np.full((1, 2), np.inf), np.zeros((1, 2), bool), ("a", "b"), ("1",))
    p = PlacementMatrix.from_array([[1.0, 2.0]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0
