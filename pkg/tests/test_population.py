import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsurvey import (
    DomainError,
    DrawProbabilities,
    FixtureError,
    ParseError,
    Population,
    SchemaError,
    draw_probabilities,
    load_fixture,
    load_population,
    population_mean,
    population_total,
)
from rbsurvey.population import dump_population, fixture_path, validate_fixture

CSV = "id,y,x\n1,1.5,2\n2,2.5,3\n3,-1,5\n"


def test_load_basic():
    pop = load_population(io.StringIO(CSV), {"responses": {"y": "y"}, "size": "x"})
    assert pop.N == 3
    np.testing.assert_array_equal(pop.response("y"), [1.5, 2.5, -1.0])
    np.testing.assert_array_equal(pop.size_measure, [2, 3, 5])
    assert population_total(pop, "y") == 3.0
    assert population_mean(pop, "y") == 1.0


def test_load_flat_schema_and_bytes():
    pop = load_population(io.BytesIO(CSV.encode()), {"y": "y"})
    assert pop.size_measure is None
    assert pop.N == 3


def test_missing_column():
    with pytest.raises(SchemaError, match="missing column"):
        load_population(io.StringIO(CSV), {"responses": {"y": "cases"}})


def test_parse_error_reports_row():
    bad = "y\n1\n2\nabc\n"
    with pytest.raises(ParseError) as info:
        load_population(io.StringIO(bad), {"y": "y"})
    assert info.value.row == 3


def test_non_finite_cell_rejected():
    with pytest.raises(ParseError):
        load_population(io.StringIO("y\n1\nnan\n"), {"y": "y"})


def test_nonpositive_size_rejected():
    with pytest.raises(DomainError, match="row 2"):
        load_population(io.StringIO("y,x\n1,1\n2,0\n"), {"responses": {"y": "y"}, "size": "x"})


def test_population_is_read_only():
    pop = Population({"y": [1.0, 2.0]})
    with pytest.raises(ValueError):
        pop.response("y")[0] = 5.0
    with pytest.raises(SchemaError):
        pop.response("z")


def test_draw_probabilities():
    pop = Population({"y": [1, 1, 1]}, size_measure=[1.0, 1.0, 2.0])
    np.testing.assert_allclose(draw_probabilities(pop).probs, [0.25, 0.25, 0.5])
    with pytest.raises(DomainError):
        draw_probabilities(Population({"y": [1.0]}))
    with pytest.raises(DomainError):
        DrawProbabilities([0.5, 0.6])
    with pytest.raises(DomainError):
        DrawProbabilities([1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20),
    st.data(),
)
def test_dump_roundtrip(values, data):
    sizes = data.draw(st.lists(st.floats(1e-3, 1e6), min_size=len(values), max_size=len(values)))
    pop = Population({"y": values}, size_measure=sizes)
    back = load_population(io.StringIO(dump_population(pop)), {"responses": {"y": "y"}, "size": "size"})
    np.testing.assert_array_equal(back.response("y"), pop.response("y"))
    np.testing.assert_array_equal(back.size_measure, pop.size_measure)


def test_trees_fixture():
    pop = load_fixture("trees")
    assert pop.N == 31
    assert math.isclose(population_total(pop, "volume"), 935.3)
    assert pop.size_measure is None


def test_validate_fixture_rejects_wrong_totals():
    pop = load_fixture("trees")
    tampered = Population({k: np.asarray(v) + (k == "girth") for k, v in pop.responses.items()})
    with pytest.raises(FixtureError, match="girth"):
        validate_fixture("trees", tampered)


def _fake_influenza(path, swap=False):
    # 424 districts; cases sum to the known 18900 in either column order
    rng = np.random.default_rng(0)
    cases = np.full(424, 44)
    cases[:244] += 1
    assert cases.sum() == 18900
    inhabitants = rng.integers(30_000, 900_000, size=424)
    cols = ("population", "cases") if swap else ("cases", "population")
    rows = [f"{i + 1},{a},{b}" for i, (a, b) in enumerate(zip(*((inhabitants, cases) if swap else (cases, inhabitants))))]
    path.write_text("district," + ",".join(cols) + "\n" + "\n".join(rows) + "\n")
    return cases, inhabitants


@pytest.mark.parametrize("swap", [False, True])
def test_influenza_from_env_dir(tmp_path, monkeypatch, swap):
    cases, inhabitants = _fake_influenza(tmp_path / "influenza.csv", swap)
    monkeypatch.setenv("RBSURVEY_DATA_DIR", str(tmp_path))
    pop = load_fixture("influenza")
    np.testing.assert_array_equal(pop.response("cases"), cases)
    np.testing.assert_array_equal(pop.size_measure, inhabitants)


def test_influenza_missing(tmp_path, monkeypatch):
    monkeypatch.setenv("RBSURVEY_DATA_DIR", str(tmp_path))
    try:
        fixture_path("influenza")
    except FixtureError as exc:
        assert "RBSURVEY_DATA_DIR" in str(exc)
    else:  # a bundled copy exists
        pass


def test_env_dir_overrides_bundled(tmp_path, monkeypatch):
    (tmp_path / "trees.csv").write_text("girth,height,volume\n1,2,3\n")
    monkeypatch.setenv("RBSURVEY_DATA_DIR", str(tmp_path))
    with pytest.raises(FixtureError, match="N=31"):
        load_fixture("trees")


def test_unknown_fixture():
    with pytest.raises(FixtureError):
        load_fixture("nope")
