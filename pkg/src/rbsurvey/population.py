"""Finite-population data model, CSV ingestion and bundled fixtures.

A :class:`Population` holds one or more response vectors over the units
``1..N`` and, optionally, a strictly positive size measure used to build
probability-proportional-to-size draw probabilities.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Mapping

import numpy as np

from .errors import DomainError, FixtureError, ParseError, SchemaError

__all__ = [
    "Population",
    "DrawProbabilities",
    "Schema",
    "load_population",
    "dump_population",
    "population_total",
    "population_mean",
    "draw_probabilities",
    "FIXTURES",
    "fixture_path",
    "load_fixture",
    "validate_fixture",
]

DATA_DIR_ENV = "RBSURVEY_DATA_DIR"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Population:
    """Responses (and optional size measure) over the unit labels ``1..N``.

    Parameters
    ----------
    responses : mapping of str to array_like
        Response name to a length-``N`` vector of reals.
    size_measure : array_like, optional
        Length-``N`` vector of strictly positive auxiliary sizes.
    """

    responses: Mapping[str, np.ndarray]
    size_measure: np.ndarray | None = None
    labels: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.responses:
            raise SchemaError("a population needs at least one response")
        resp = {str(k): _frozen(v) for k, v in self.responses.items()}
        lengths = {v.shape for v in resp.values()}
        if len(lengths) != 1 or len(next(iter(lengths))) != 1:
            raise DomainError("response vectors must be 1-D and of equal length")
        n_units = next(iter(resp.values())).shape[0]
        if n_units < 1:
            raise DomainError("a population needs N >= 1 units")
        for name, v in resp.items():
            if not np.all(np.isfinite(v)):
                raise DomainError(f"response {name!r} has non-finite values")
        size = None
        if self.size_measure is not None:
            size = _frozen(self.size_measure)
            if size.shape != (n_units,):
                raise DomainError("size_measure length must equal N")
            if not np.all(np.isfinite(size)) or np.any(size <= 0):
                raise DomainError("size_measure entries must be finite and > 0")
        labels = np.arange(1, n_units + 1)
        labels.setflags(write=False)
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "size_measure", size)
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return int(self.labels.shape[0])

    def response(self, name: str) -> np.ndarray:
        try:
            return self.responses[name]
        except KeyError:
            raise SchemaError(
                f"unknown response {name!r}; available: {sorted(self.responses)}"
            ) from None

    def summary(self) -> dict:
        """N and per-response totals, for checksum comparisons."""
        return {
            "N": self.N,
            "totals": {k: population_total(self, k) for k in self.responses},
        }


@dataclass(frozen=True, eq=False)
class DrawProbabilities:
    """Per-draw selection probabilities for PPSWR; entries in (0, 1] summing to 1."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("draw probabilities must be a non-empty 1-D vector")
        if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
            raise DomainError("draw probabilities must lie in (0, 1]")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise DomainError(f"draw probabilities sum to {math.fsum(p)!r}, not 1")
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return int(self.probs.shape[0])


@dataclass(frozen=True)
class Schema:
    """Maps response names to CSV columns, plus an optional size column."""

    responses: Mapping[str, str]
    size: str | None = None

    @classmethod
    def coerce(cls, obj) -> "Schema":
        if isinstance(obj, Schema):
            return obj
        obj = dict(obj)
        size = obj.pop("size", None)
        responses = obj.pop("responses", None)
        if responses is None:
            responses = obj
        elif obj:
            raise SchemaError(f"unexpected schema keys: {sorted(obj)}")
        return cls(responses=dict(responses), size=size)


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {text!r} as a number", row=row
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {column!r}: non-finite value {text!r}", row=row)
    return value


def load_population(csv_source: IO[bytes] | IO[str] | str | os.PathLike, schema) -> Population:
    """Read a population from a headed CSV file.

    Parameters
    ----------
    csv_source : binary/text stream or path
        Comma separated, header row, UTF-8, ``.`` decimal point.
    schema : Schema or mapping
        Either a :class:`Schema` or a mapping like
        ``{"responses": {"cases": "cases"}, "size": "population"}``.
        A flat mapping ``{"y": "col"}`` is read as responses only.

    Rows keep file order; unit labels are the positions ``1..N``. Any label
    column in the file is ignored.
    """
    schema = Schema.coerce(schema)
    if isinstance(csv_source, (str, os.PathLike)):
        with open(csv_source, "rb") as fh:
            raw = fh.read()
    else:
        raw = csv_source.read()
    text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("CSV input is empty (no header row)") from None

    wanted = list(schema.responses.values()) + ([schema.size] if schema.size else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"missing column(s) {missing}; header is {header}")
    index = {c: header.index(c) for c in wanted}

    columns: dict[str, list[float]] = {c: [] for c in wanted}
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {row_no}: expected {len(header)} cells, got {len(row)}", row=row_no)
        for c in wanted:
            columns[c].append(_parse_cell(row[index[c]].strip(), row_no, c))

    size = None
    if schema.size:
        size = np.array(columns[schema.size])
        bad = np.flatnonzero(size <= 0)
        if bad.size:
            raise DomainError(
                f"size column {schema.size!r} has non-positive value at row {int(bad[0]) + 1}"
            )
    return Population(
        responses={name: columns[col] for name, col in schema.responses.items()},
        size_measure=size,
    )


def dump_population(pop: Population, size_column: str = "size") -> str:
    """Serialize to CSV text; ``repr`` keeps every float bit-exact on reload."""
    names = list(pop.responses)
    header = names + ([size_column] if pop.size_measure is not None else [])
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for i in range(pop.N):
        row = [repr(float(pop.responses[k][i])) for k in names]
        if pop.size_measure is not None:
            row.append(repr(float(pop.size_measure[i])))
        writer.writerow(row)
    return out.getvalue()


def population_total(pop: Population, response: str) -> float:
    """Sum of the response over all N units."""
    return math.fsum(pop.response(response))


def population_mean(pop: Population, response: str) -> float:
    return population_total(pop, response) / pop.N


def draw_probabilities(pop: Population) -> DrawProbabilities:
    """PPS draw probabilities ``x_i / sum(x)`` from the population's size measure."""
    if pop.size_measure is None:
        raise DomainError("population has no size measure")
    x = pop.size_measure
    return DrawProbabilities(x / math.fsum(x))


# -- bundled fixtures -------------------------------------------------------

FIXTURES: dict[str, dict] = {
    # samplingbook::influenza (R). Not redistributable from inside the sandbox
    # this package was built in; supply it via $RBSURVEY_DATA_DIR.
    "influenza": {
        "file": "influenza.csv",
        "schema": {"responses": {"cases": "cases"}, "size": "population"},
        "candidate_columns": ("cases", "population", "inhabitants"),
        "N": 424,
        "totals": {"cases": 18900.0},
    },
    # datasets::trees (R), columns lower-cased.
    "trees": {
        "file": "trees.csv",
        "schema": {"responses": {"girth": "girth", "height": "height", "volume": "volume"}},
        "N": 31,
        "totals": {"girth": 410.7, "height": 2356.0, "volume": 935.3},
    },
}


def fixture_path(name: str) -> Path:
    """Locate a fixture file: ``$RBSURVEY_DATA_DIR`` first, then package data."""
    if name not in FIXTURES:
        raise FixtureError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}")
    fname = FIXTURES[name]["file"]
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        candidate = Path(override) / fname
        if candidate.is_file():
            return candidate
    bundled = resources.files("rbsurvey") / "data" / fname
    if bundled.is_file():
        return Path(str(bundled))
    raise FixtureError(
        f"fixture {name!r} not found: place {fname} in ${DATA_DIR_ENV} "
        "(see README, 'Datasets')"
    )


def _resolve_influenza_schema(path: Path) -> dict:
    """Pick the case column as the one whose total matches the checksum.

    Column naming of exported copies varies; the two numeric columns are told
    apart by the known total number of cases.
    """
    spec = FIXTURES["influenza"]
    with open(path, newline="", encoding="utf-8-sig") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    present = [c for c in spec["candidate_columns"] if c in header]
    if len(present) < 2:
        raise FixtureError(
            f"influenza fixture needs two of the columns {spec['candidate_columns']}, "
            f"found header {header}"
        )
    totals = {}
    for col in present:
        pop = load_population(path, {"responses": {col: col}})
        totals[col] = population_total(pop, col)
    target = spec["totals"]["cases"]
    cases = [c for c, t in totals.items() if abs(t - target) < 1e-6]
    if len(cases) != 1:
        raise FixtureError(
            f"influenza fixture: no unique column sums to {target:g} (column totals {totals})"
        )
    size = next(c for c in present if c != cases[0])
    return {"responses": {"cases": cases[0]}, "size": size}


def validate_fixture(name: str, pop: Population) -> None:
    spec = FIXTURES[name]
    if pop.N != spec["N"]:
        raise FixtureError(f"fixture {name!r}: expected N={spec['N']}, got N={pop.N}")
    for resp, expected in spec["totals"].items():
        got = population_total(pop, resp)
        if abs(got - expected) > 1e-9 * max(1.0, abs(expected)):
            raise FixtureError(f"fixture {name!r}: total({resp})={got!r}, expected {expected!r}")


def load_fixture(name: str) -> Population:
    """Load and checksum-validate a named fixture."""
    path = fixture_path(name)
    if name == "influenza":
        schema = _resolve_influenza_schema(path)
    else:
        schema = FIXTURES[name]["schema"]
    pop = load_population(path, schema)
    validate_fixture(name, pop)
    return pop
