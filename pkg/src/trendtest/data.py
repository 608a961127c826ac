"""Two-period panel datasets: CSV ingestion, validation, design expansion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np


class SchemaError(ValueError):
    pass


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PanelDataset:
    """Outcomes before (``y0``) and after (``y1``) treatment, a 0/1 treatment
    indicator ``d`` and an (n, p) covariate matrix ``X``."""

    y0: np.ndarray
    y1: np.ndarray
    d: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...] = ()
    unit_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float)
        y1 = np.asarray(self.y1, dtype=float)
        d = np.asarray(self.d, dtype=float)
        n = y0.shape[0]
        X = np.asarray(self.X, dtype=float)
        if X.size == 0:
            X = X.reshape(n, 0)
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "X", np.ascontiguousarray(X))
        object.__setattr__(self, "covariate_names", names)
        if self.unit_ids is not None:
            object.__setattr__(self, "unit_ids", tuple(str(u) for u in self.unit_ids))
        self.validate()

    def validate(self) -> None:
        n = self.y0.shape[0]
        if self.y0.ndim != 1 or self.y1.ndim != 1 or self.d.ndim != 1:
            raise ValidationError("y0, y1 and d must be 1-D")
        if n < 2:
            raise ValidationError("need at least 2 units")
        if self.y1.shape[0] != n or self.d.shape[0] != n or self.X.shape[0] != n:
            raise ValidationError("all columns must have the same length")
        if self.X.ndim != 2 or len(self.covariate_names) != self.X.shape[1]:
            raise ValidationError("covariate names do not match the covariate matrix")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise ValidationError("duplicate covariate names")
        if self.unit_ids is not None and len(self.unit_ids) != n:
            raise ValidationError("unit_ids length does not match")
        for name, arr in (("y0", self.y0), ("y1", self.y1), ("d", self.d), ("X", self.X)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"missing or non-finite values in {name}")
        bad = np.flatnonzero((self.d != 0) & (self.d != 1))
        if bad.size:
            raise ValidationError(f"treatment must be 0 or 1 (row {bad[0] + 1})")
        if self.d.min() == self.d.max():
            raise ValidationError("need at least one treated and one control unit")

    @property
    def n(self) -> int:
        return self.y0.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def dy(self) -> np.ndarray:
        return self.y1 - self.y0

    def subset(self, rows) -> PanelDataset:
        ids = None if self.unit_ids is None else tuple(np.asarray(self.unit_ids, dtype=object)[rows])
        return PanelDataset(self.y0[rows], self.y1[rows], self.d[rows], self.X[rows],
                            self.covariate_names, ids)


@dataclass(frozen=True)
class DesignSpec:
    include_pretreatment_outcome: bool = False
    pairwise_interactions: bool = False
    squares_of: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class ColumnMap:
    """Maps CSV headers onto panel roles. ``covariates=None`` means every
    column not used elsewhere."""

    y0: str = "y0"
    y1: str = "y1"
    d: str = "d"
    covariates: Sequence[str] | None = None
    unit_id: str | None = None


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: column {column!r} is not numeric ({cell!r})") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: column {column!r} is missing or non-finite ({cell!r})")
    return value


def load_csv(path, schema: ColumnMap | None = None) -> PanelDataset:
    """Read a panel from a headered UTF-8 CSV file.

    Row numbers in error messages count data rows from 1.
    """
    schema = schema or ColumnMap()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    index = {name: j for j, name in enumerate(header)}
    used = {schema.y0, schema.y1, schema.d}
    if schema.unit_id is not None:
        used.add(schema.unit_id)
    covariates = (
        [h for h in header if h not in used] if schema.covariates is None else list(schema.covariates)
    )
    for name in [schema.y0, schema.y1, schema.d, *covariates] + (
        [schema.unit_id] if schema.unit_id else []
    ):
        if name not in index:
            raise SchemaError(f"column {name!r} not found in {path}")

    n = len(rows)
    y0, y1, d = np.empty(n), np.empty(n), np.empty(n)
    X = np.empty((n, len(covariates)))
    ids = [] if schema.unit_id else None
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"row {i + 1}: expected {len(header)} fields, found {len(row)}")
        y0[i] = _parse_float(row[index[schema.y0]], i + 1, schema.y0)
        y1[i] = _parse_float(row[index[schema.y1]], i + 1, schema.y1)
        d[i] = _parse_float(row[index[schema.d]], i + 1, schema.d)
        if d[i] not in (0.0, 1.0):
            raise ValidationError(f"row {i + 1}: treatment {schema.d!r} must be 0 or 1, got {row[index[schema.d]]!r}")
        for j, c in enumerate(covariates):
            X[i, j] = _parse_float(row[index[c]], i + 1, c)
        if ids is not None:
            ids.append(row[index[schema.unit_id]])
    return PanelDataset(y0, y1, d, X, tuple(covariates), None if ids is None else tuple(ids))


def write_csv(ds: PanelDataset, path) -> None:
    """Write ``ds`` with headers y0, y1, d and the covariate names."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        lead = ["unit_id"] if ds.unit_ids is not None else []
        w.writerow(lead + ["y0", "y1", "d", *ds.covariate_names])
        for i in range(ds.n):
            row = [repr(float(v)) for v in (ds.y0[i], ds.y1[i], ds.d[i], *ds.X[i])]
            w.writerow(([ds.unit_ids[i]] if ds.unit_ids is not None else []) + row)


def expand_design(ds: PanelDataset, spec: DesignSpec) -> PanelDataset:
    """Append pairwise products ("a:b") and squares ("a^2") to the covariates.

    Constant columns created by the expansion and exact duplicates of an
    earlier column are dropped; squares of 0/1 columns therefore vanish.
    Raw columns are always kept as given.
    """
    names = list(ds.covariate_names)
    unknown = [s for s in spec.squares_of if s not in names]
    if unknown:
        raise SchemaError(f"cannot square unknown column(s): {', '.join(unknown)}")
    cols = [ds.X[:, j] for j in range(ds.p)]
    out_names = list(names)
    raw_count = len(cols)

    candidates: list[tuple[str, np.ndarray]] = []
    if spec.pairwise_interactions:
        for a, b in combinations(range(raw_count), 2):
            candidates.append((f"{names[a]}:{names[b]}", cols[a] * cols[b]))
    for s in spec.squares_of:
        j = names.index(s)
        candidates.append((f"{s}^2", cols[j] * cols[j]))
    if spec.include_pretreatment_outcome:
        candidates.append(("y0", ds.y0.copy()))

    seen = {c.tobytes() for c in cols}
    for name, col in candidates:
        col = col + 0.0  # folds -0.0 into 0.0 for the duplicate check
        if col.min() == col.max():
            continue
        key = col.tobytes()
        if key in seen:
            continue
        seen.add(key)
        cols.append(col)
        out_names.append(name)
    X = np.column_stack(cols) if cols else ds.X
    return replace(ds, X=X, covariate_names=tuple(out_names))
