"""Respondent-by-stimulus placement data: container, CSV ingestion, filtering."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInput, NoValidRespondents, ParseError

DEFAULT_MISSING = frozenset({"", "NA", "na", "."})


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PlacementMatrix:
    """n respondents x J stimuli of placements on a common rating scale.

    Cells flagged in ``missing`` hold NaN in ``values``. ``self_placement``
    is optional and may itself contain NaN for respondents who skipped it.
    """

    values: np.ndarray
    missing: np.ndarray
    stimulus_labels: tuple[str, ...]
    respondent_ids: tuple[str, ...]
    self_placement: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d grid")
        missing = _frozen(self.missing, bool)
        if missing.shape != values.shape:
            raise ValueError("missing mask shape does not match values")
        n, J = values.shape
        if n < 1 or J < 1:
            raise ValueError("need at least one respondent and one stimulus")
        values[missing] = np.nan
        if not np.all(np.isfinite(values[~missing])):
            raise ValueError("non-missing placements must be finite")
        labels = tuple(str(s) for s in self.stimulus_labels)
        ids = tuple(str(s) for s in self.respondent_ids)
        if len(labels) != J or len(set(labels)) != J:
            raise ValueError("stimulus labels must be J unique strings")
        if len(ids) != n or len(set(ids)) != n:
            raise ValueError("respondent ids must be n unique strings")
        object.__setattr__(self, "values", _frozen(values, float))
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "stimulus_labels", labels)
        object.__setattr__(self, "respondent_ids", ids)
        if self.self_placement is not None:
            sp = _frozen(self.self_placement, float)
            if sp.shape != (n,):
                raise ValueError("self_placement must be an n-vector")
            object.__setattr__(self, "self_placement", sp)

    @classmethod
    def from_array(cls, values, stimulus_labels=None, respondent_ids=None,
                   self_placement=None) -> "PlacementMatrix":
        """Build from a dense grid; NaN cells become missing."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d grid")
        n, J = values.shape
        if stimulus_labels is None:
            stimulus_labels = [f"S{j + 1}" for j in range(J)]
        if respondent_ids is None:
            respondent_ids = [str(i + 1) for i in range(n)]
        return cls(values, np.isnan(values), tuple(stimulus_labels),
                   tuple(respondent_ids), self_placement)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]

    def take(self, rows: Sequence[int]) -> "PlacementMatrix":
        rows = np.asarray(rows, dtype=int)
        sp = None if self.self_placement is None else self.self_placement[rows]
        return PlacementMatrix(self.values[rows], self.missing[rows],
                               self.stimulus_labels,
                               tuple(self.respondent_ids[r] for r in rows), sp)

    def equals(self, other: "PlacementMatrix") -> bool:
        if (self.stimulus_labels != other.stimulus_labels
                or self.respondent_ids != other.respondent_ids):
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        if not np.array_equal(self.values, other.values, equal_nan=True):
            return False
        if (self.self_placement is None) != (other.self_placement is None):
            return False
        return self.self_placement is None or np.array_equal(
            self.self_placement, other.self_placement, equal_nan=True)


@dataclass(frozen=True)
class IngestOptions:
    missing_tokens: frozenset = field(default_factory=lambda: DEFAULT_MISSING)
    self_column: Optional[str] = None
    id_column: Optional[str] = None
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1 or not self.delimiter.isprintable():
            raise ValueError("delimiter must be one printable character")
        if not self.missing_tokens:
            raise ValueError("missing_tokens must be non-empty")
        object.__setattr__(self, "missing_tokens", frozenset(self.missing_tokens))


def _parse_cell(token: str, tokens, where: str) -> float:
    token = token.strip()
    if token in tokens:
        return math.nan
    try:
        x = float(token)
    except ValueError:
        raise ParseError(f"{where}: non-numeric value {token!r}") from None
    if not math.isfinite(x):
        raise ParseError(f"{where}: non-finite value {token!r}")
    return x


def load_csv(path, opts: Optional[IngestOptions] = None) -> PlacementMatrix:
    opts = opts or IngestOptions()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=opts.delimiter, quoting=csv.QUOTE_NONE))
    rows = [r for r in rows if r]
    if not rows:
        raise EmptyInput(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyInput(f"{path}: no data rows")

    special = {}
    for role, name in (("id", opts.id_column), ("self", opts.self_column)):
        if name is not None:
            if name not in header:
                raise ParseError(f"{path}: column {name!r} not in header")
            special[role] = header.index(name)
    stim_cols = [k for k in range(len(header)) if k not in special.values()]
    if not stim_cols:
        raise ParseError(f"{path}: no stimulus columns")

    values = np.empty((len(body), len(stim_cols)))
    ids, selfs = [], []
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        for j, k in enumerate(stim_cols):
            values[r, j] = _parse_cell(row[k], opts.missing_tokens, f"{path}:{line}")
        ids.append(row[special["id"]].strip() if "id" in special else str(r + 1))
        if "self" in special:
            selfs.append(_parse_cell(row[special["self"]], opts.missing_tokens,
                                     f"{path}:{line}"))
    try:
        return PlacementMatrix(values, np.isnan(values), tuple(header[k] for k in stim_cols),
                               tuple(ids), np.array(selfs) if "self" in special else None)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_csv(p: PlacementMatrix, path, id_column="id", self_column="self",
              missing_token="NA", delimiter=","):
    """Write ``p`` so that :func:`load_csv` with matching options reads it back exactly."""
    header = [id_column] + list(p.stimulus_labels)
    if p.self_placement is not None:
        header.append(self_column)

    def cell(x):
        return missing_token if math.isnan(x) else repr(float(x))

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for i in range(p.n):
            row = [p.respondent_ids[i]] + [cell(x) for x in p.values[i]]
            if p.self_placement is not None:
                row.append(cell(p.self_placement[i]))
            w.writerow(row)


def complete_cases(p: PlacementMatrix) -> tuple[PlacementMatrix, list[int]]:
    """Keep respondents who placed every stimulus; return the others' row indices."""
    bad = p.missing.any(axis=1)
    dropped = [int(i) for i in np.flatnonzero(bad)]
    if len(dropped) == p.n:
        raise NoValidRespondents("every respondent has at least one missing placement")
    if not dropped:
        return p, []
    return p.take(np.flatnonzero(~bad)), dropped


def design_matrix(row) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if not np.all(np.isfinite(row)):
        raise ValueError("design rows must be finite")
    return np.column_stack([np.ones(row.shape[0]), row])
