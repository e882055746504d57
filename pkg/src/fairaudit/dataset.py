"""Labeled tabular data with declared column roles.

A :class:`Dataset` is an immutable column store. Every column carries a role
(feature, protected, outcome, id) and a dtype (numeric, categorical, binary).
Protected columns removed from the model inputs by :func:`drop_protected` are
kept in a side table so group metrics can still be computed.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from ._rng import make_rng
from .errors import (
    BadReference,
    BadValue,
    ConstantColumn,
    ContinuousProtected,
    EmptyData,
    MultipleOutcomes,
    NotNumeric,
    SchemaMismatch,
    TooFewRows,
    UnknownAttribute,
)

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})
MISSING_CATEGORY = "__missing__"


class Role(str, Enum):
    FEATURE = "feature"
    PROTECTED = "protected"
    OUTCOME = "outcome"
    ID = "id"


class DType(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BINARY = "binary"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    role: Role
    dtype: DType

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SchemaMismatch(f"column name must be a nonempty string, got {self.name!r}")
        try:
            object.__setattr__(self, "role", Role(self.role))
            object.__setattr__(self, "dtype", DType(self.dtype))
        except ValueError as exc:
            raise SchemaMismatch(f"column {self.name!r}: {exc}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "role": self.role.value, "dtype": self.dtype.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSchema":
        extra = set(d) - {"name", "role", "dtype"}
        if extra:
            raise SchemaMismatch(f"unknown schema keys {sorted(extra)}")
        try:
            return cls(d["name"], d["role"], d["dtype"])
        except KeyError as exc:
            raise SchemaMismatch(f"schema entry missing {exc}") from None


def read_schema(path: str | os.PathLike) -> list[ColumnSchema]:
    """Read a schema sidecar: a JSON list of ``{"name", "role", "dtype"}``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise SchemaMismatch("schema sidecar must be a JSON list")
    return [ColumnSchema.from_dict(entry) for entry in raw]


def write_schema(schema: Iterable[ColumnSchema], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in schema], fh, indent=2)
        fh.write("\n")


def validate_schema(schema: Sequence[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    dupes = sorted(n for n, k in Counter(names).items() if k > 1)
    if dupes:
        raise SchemaMismatch(f"duplicate column names {dupes}")
    outcomes = [c for c in schema if c.role is Role.OUTCOME]
    if len(outcomes) > 1:
        raise MultipleOutcomes(f"more than one outcome column: {[c.name for c in outcomes]}")
    if not outcomes:
        raise SchemaMismatch("schema declares no outcome column")
    if outcomes[0].dtype is not DType.BINARY:
        raise SchemaMismatch(f"outcome column {outcomes[0].name!r} must be binary")
    for c in schema:
        if c.role is Role.PROTECTED and c.dtype is DType.NUMERIC:
            raise ContinuousProtected(
                f"protected column {c.name!r} is numeric; bin it into categories first"
            )


def label_of(value: Any) -> str:
    """Canonical string label of a categorical or binary value."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _coerce(col: ColumnSchema, values: Any) -> np.ndarray:
    if col.dtype is DType.NUMERIC:
        try:
            arr = np.array(values, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise BadValue(f"column {col.name!r}: {exc}") from None
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise BadValue(f"column {col.name!r} has missing or non-finite values")
    elif col.dtype is DType.BINARY:
        arr = np.asarray(values)
        if arr.dtype.kind == "f" and not np.all(np.isin(arr, (0.0, 1.0))):
            raise BadValue(f"binary column {col.name!r} holds values other than 0/1")
        try:
            arr = arr.astype(np.int64)
        except (TypeError, ValueError) as exc:
            raise BadValue(f"binary column {col.name!r}: {exc}") from None
        if not np.all((arr == 0) | (arr == 1)):
            raise BadValue(f"binary column {col.name!r} holds values other than 0/1")
    else:
        arr = np.array([label_of(v) for v in values], dtype=object)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-major table.

    ``side_schema``/``side_columns`` hold protected attributes that were
    removed from the model inputs; they are still available through
    :meth:`column` for grouping.
    """

    schema: tuple[ColumnSchema, ...]
    columns: Mapping[str, np.ndarray]
    log: Mapping[str, Any] = field(default_factory=dict)
    side_schema: tuple[ColumnSchema, ...] = ()
    side_columns: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        schema = tuple(self.schema)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "side_schema", tuple(self.side_schema))
        validate_schema(schema)
        cols = {c.name: _coerce(c, self.columns[c.name]) for c in schema if c.name in self.columns}
        missing = [c.name for c in schema if c.name not in self.columns]
        if missing:
            raise SchemaMismatch(f"no data for columns {missing}")
        side = {c.name: _coerce(c, self.side_columns[c.name]) for c in self.side_schema}
        lengths = {len(a) for a in (*cols.values(), *side.values())}
        if len(lengths) > 1:
            raise BadValue(f"columns have unequal lengths {sorted(lengths)}")
        clash = {c.name for c in schema} & set(side)
        if clash:
            raise SchemaMismatch(f"columns {sorted(clash)} appear in both tables")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "side_columns", side)
        object.__setattr__(self, "log", dict(self.log))

    @classmethod
    def from_columns(cls, schema: Sequence[ColumnSchema | Mapping], data: Mapping[str, Any],
                     log: Mapping | None = None) -> "Dataset":
        schema = [c if isinstance(c, ColumnSchema) else ColumnSchema.from_dict(c) for c in schema]
        return cls(tuple(schema), dict(data), log or {})

    # -- accessors ---------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))

    def __len__(self) -> int:
        return self.n_rows

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def spec(self, name: str) -> ColumnSchema:
        for c in (*self.schema, *self.side_schema):
            if c.name == name:
                return c
        raise UnknownAttribute(f"unknown column {name!r}")

    def column(self, name: str) -> np.ndarray:
        if name in self.columns:
            return self.columns[name]
        if name in self.side_columns:
            return self.side_columns[name]
        raise UnknownAttribute(f"unknown column {name!r}")

    @property
    def outcome_name(self) -> str:
        return next(c.name for c in self.schema if c.role is Role.OUTCOME)

    @property
    def labels(self) -> np.ndarray:
        return self.columns[self.outcome_name]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema if c.role is Role.FEATURE]

    @property
    def protected_names(self) -> list[str]:
        """Protected attributes in schema order, then those in the side table."""
        return [c.name for c in (*self.schema, *self.side_schema) if c.role is Role.PROTECTED]

    def group_labels(self, attribute: str) -> np.ndarray:
        """Column values as canonical string labels (for grouping)."""
        return np.array([label_of(v) for v in self.column(attribute)], dtype=object)

    # -- derived datasets --------------------------------------------------

    def take(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return dataclasses.replace(
            self,
            columns={k: v[idx] for k, v in self.columns.items()},
            side_columns={k: v[idx] for k, v in self.side_columns.items()},
        )

    def with_columns(self, updates: Mapping[str, Any], log_updates: Mapping | None = None) -> "Dataset":
        cols = dict(self.columns)
        cols.update(updates)
        new_log = dict(self.log)
        new_log.update(log_updates or {})
        return dataclasses.replace(self, columns=cols, log=new_log)

    def select_features(self, keep: Iterable[str]) -> "Dataset":
        """Drop every feature column not in ``keep`` (other roles untouched)."""
        keep = set(keep)
        schema = tuple(c for c in self.schema if c.role is not Role.FEATURE or c.name in keep)
        return dataclasses.replace(
            self, schema=schema, columns={c.name: self.columns[c.name] for c in schema}
        )

    # -- identity ----------------------------------------------------------

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over a canonical rendering of schema and rows.

        Schema entries are sorted by name and values rendered row-major in that
        column order; numbers use 17 significant digits so that the hash is a
        function of the exact float values.
        """
        h = hashlib.sha256()
        for section, schema, cols in (
            ("main", self.schema, self.columns),
            ("side", self.side_schema, self.side_columns),
        ):
            ordered = sorted(schema, key=lambda c: c.name)
            h.update(section.encode())
            h.update(json.dumps([c.to_dict() for c in ordered]).encode())
            h.update(b"\n")
            rendered = [_render_column(c, cols[c.name]) for c in ordered]
            for row in zip(*rendered):
                h.update("\x1f".join(row).encode())
                h.update(b"\n")
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)


def _render_column(col: ColumnSchema, values: np.ndarray) -> list[str]:
    if col.dtype is DType.NUMERIC:
        return [format(float(v), ".17g") for v in values]
    if col.dtype is DType.BINARY:
        return [str(int(v)) for v in values]
    return [json.dumps(v) for v in values]


# -- CSV I/O -------------------------------------------------------------


def load_csv(path: str | os.PathLike, schema: Sequence[ColumnSchema | Mapping] | str | os.PathLike,
             missing_policy: str = "impute") -> Dataset:
    """Load an RFC-4180 CSV with a header row.

    Rows missing the outcome or any protected value are always dropped.
    Missing feature values are imputed (``missing_policy="impute"``: numeric
    mean, binary mode, categorical ``"__missing__"``) or cause the row to be
    dropped (``"drop"``). What happened is recorded in ``Dataset.log``.
    """
    if missing_policy not in ("impute", "drop"):
        raise ValueError(f"missing_policy must be 'impute' or 'drop', not {missing_policy!r}")
    if isinstance(schema, (str, os.PathLike)):
        schema = read_schema(schema)
    schema = [c if isinstance(c, ColumnSchema) else ColumnSchema.from_dict(c) for c in schema]
    validate_schema(schema)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: empty file") from None
        raw_rows = [r for r in reader if r]

    dupes = sorted(n for n, k in Counter(header).items() if k > 1)
    if dupes:
        raise SchemaMismatch(f"duplicate header names {dupes}")
    declared = [c.name for c in schema]
    if set(header) != set(declared):
        raise SchemaMismatch(
            f"header/schema disagree: missing from CSV {sorted(set(declared) - set(header))}, "
            f"not in schema {sorted(set(header) - set(declared))}"
        )
    pos = {name: i for i, name in enumerate(header)}
    for lineno, r in enumerate(raw_rows, start=2):
        if len(r) != len(header):
            raise BadValue(f"line {lineno}: expected {len(header)} fields, got {len(r)}")

    cells = {c.name: [r[pos[c.name]].strip() for r in raw_rows] for c in schema}
    missing = {name: [v.lower() in MISSING_TOKENS for v in vals] for name, vals in cells.items()}

    must_have = [c.name for c in schema if c.role in (Role.OUTCOME, Role.PROTECTED)]
    optional = [c.name for c in schema if c.role in (Role.FEATURE, Role.ID)]
    if missing_policy == "drop":
        must_have = must_have + optional
    keep = [i for i in range(len(raw_rows)) if not any(missing[n][i] for n in must_have)]
    dropped_by = {n: sum(missing[n]) for n in must_have if any(missing[n])}

    data: dict[str, Any] = {}
    imputed: dict[str, int] = {}
    for c in schema:
        vals = [cells[c.name][i] for i in keep]
        miss = [missing[c.name][i] for i in keep]
        parsed = [None if m else _parse_cell(c, v, i) for v, m, i in zip(vals, miss, keep)]
        n_miss = sum(miss)
        if n_miss:
            imputed[c.name] = n_miss
            fill = _impute_value(c, [p for p in parsed if p is not None])
            parsed = [fill if p is None else p for p in parsed]
        data[c.name] = parsed

    if not keep:
        raise EmptyData(f"{path}: no usable rows")
    load_log = {
        "source": os.path.basename(os.fspath(path)),
        "rows_read": len(raw_rows),
        "rows_kept": len(keep),
        "dropped_rows": len(raw_rows) - len(keep),
        "dropped_by_column": dropped_by,
        "imputed": imputed,
        "missing_policy": missing_policy,
    }
    if load_log["dropped_rows"]:
        log.info("dropped %d rows with missing required values", load_log["dropped_rows"])
    return Dataset(tuple(schema), data, {"load": load_log})


def _parse_cell(col: ColumnSchema, text: str, row: int):
    if col.dtype is DType.NUMERIC:
        try:
            value = float(text)
        except ValueError:
            raise BadValue(f"row {row + 2}, column {col.name!r}: cannot parse {text!r} as number") from None
        if not math.isfinite(value):
            raise BadValue(f"row {row + 2}, column {col.name!r}: non-finite value {text!r}")
        return value
    if col.dtype is DType.BINARY:
        if text in ("0", "1"):
            return int(text)
        try:
            value = float(text)
        except ValueError:
            value = None
        if value in (0.0, 1.0):
            return int(value)
        raise BadValue(f"row {row + 2}, column {col.name!r}: binary value must be 0 or 1, got {text!r}")
    return text


def _impute_value(col: ColumnSchema, present: list):
    if col.dtype is DType.NUMERIC:
        if not present:
            raise EmptyData(f"column {col.name!r} has no values to impute from")
        return float(np.mean(present))
    if col.dtype is DType.BINARY:
        ones = sum(present)
        return 1 if ones * 2 > len(present) else 0
    return MISSING_CATEGORY


def save_csv(ds: Dataset, path: str | os.PathLike, schema_path: str | os.PathLike | None = None) -> None:
    """Write ``ds`` as CSV (side-table columns appended) plus optional schema sidecar."""
    schema = (*ds.schema, *ds.side_schema)
    rendered = []
    for c in schema:
        values = ds.column(c.name)
        if c.dtype is DType.NUMERIC:
            rendered.append([repr(float(v)) for v in values])
        elif c.dtype is DType.BINARY:
            rendered.append([str(int(v)) for v in values])
        else:
            rendered.append([str(v) for v in values])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([c.name for c in schema])
        writer.writerows(zip(*rendered))
    if schema_path is not None:
        write_schema(schema, schema_path)


# -- transforms ----------------------------------------------------------


def normalize(ds: Dataset, method: str = "minmax", columns: Sequence[str] | None = None) -> Dataset:
    """Rescale numeric columns; ``minmax`` to [0, 1], ``zscore`` to mean 0 / population std 1.

    ``columns`` defaults to every numeric feature. Returns a new Dataset.
    """
    if method not in ("minmax", "zscore"):
        raise ValueError(f"unknown normalization method {method!r}")
    if columns is None:
        columns = [c.name for c in ds.schema if c.role is Role.FEATURE and c.dtype is DType.NUMERIC]
    updates, params = {}, {}
    for name in columns:
        if ds.spec(name).dtype is not DType.NUMERIC:
            raise NotNumeric(f"column {name!r} is not numeric")
        x = ds.column(name)
        if method == "minmax":
            lo, hi = float(x.min()), float(x.max())
            if not hi > lo:
                raise ConstantColumn(f"column {name!r} is constant ({lo})")
            updates[name] = (x - lo) / (hi - lo)
            params[name] = [lo, hi]
        else:
            mu, sd = float(x.mean()), float(x.std())
            if not sd > 0:
                raise ConstantColumn(f"column {name!r} has zero variance")
            updates[name] = (x - mu) / sd
            params[name] = [mu, sd]
    prior = list(ds.log.get("normalize", []))
    return ds.with_columns(updates, {"normalize": prior + [{"method": method, "params": params}]})


@dataclass(frozen=True)
class RepresentativenessReport:
    attribute: str
    category_counts: dict[str, int]
    reference: dict[str, float]
    statistic: float
    p_value: float
    verdict: str  # representative | skewed | insufficient
    alpha: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def representativeness_test(ds: Dataset, attribute: str, reference: Mapping[str, float] | None = None,
                            alpha: float = 0.05) -> RepresentativenessReport:
    """Pearson chi-square goodness of fit of a categorical column against ``reference``.

    The reference defaults to uniform over the observed categories. A test with
    any expected count below 5 is reported as ``insufficient`` whatever its
    p-value.
    """
    spec = ds.spec(attribute)
    if spec.dtype is DType.NUMERIC:
        raise UnknownAttribute(f"attribute {attribute!r} is numeric, not categorical")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    counts = Counter(ds.group_labels(attribute))
    n = sum(counts.values())
    if reference is None:
        reference = {k: 1.0 / len(counts) for k in counts}
    reference = {label_of(k): float(v) for k, v in reference.items()}
    if any(v < 0 or not math.isfinite(v) for v in reference.values()):
        raise BadReference("reference proportions must be non-negative")
    if abs(math.fsum(reference.values()) - 1.0) > 1e-9:
        raise BadReference(f"reference proportions sum to {math.fsum(reference.values())}, not 1")
    unreferenced = sorted(k for k in counts if reference.get(k, 0.0) == 0.0)
    if unreferenced:
        raise BadReference(f"observed categories {unreferenced} have zero reference proportion")

    cats = sorted(set(counts) | set(reference))
    active = [k for k in cats if reference.get(k, 0.0) > 0]
    # n * sum (p_obs - p_ref)^2 / p_ref == sum (O - E)^2 / E, and is exactly 0
    # when the reference equals the observed proportions.
    statistic = n * math.fsum((counts.get(k, 0) / n - reference[k]) ** 2 / reference[k] for k in active)
    dof = len(active) - 1
    p_value = float(stats.chi2.sf(statistic, dof)) if dof > 0 else 1.0
    if any(n * reference[k] < 5 for k in active):
        verdict = "insufficient"
    elif p_value < alpha:
        verdict = "skewed"
    else:
        verdict = "representative"
    return RepresentativenessReport(
        attribute=attribute,
        category_counts={k: counts.get(k, 0) for k in cats},
        reference={k: reference.get(k, 0.0) for k in cats},
        statistic=statistic,
        p_value=p_value,
        verdict=verdict,
        alpha=alpha,
    )


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded split stratified on outcome x every protected attribute.

    Every stratum with at least two rows lands in both halves whenever the
    overall sizes allow it; single-row strata go to the training half and are
    noted in the ``split`` log entry of both results.
    """
    n = ds.n_rows
    if not 0 < train_fraction < 1:
        raise TooFewRows(f"train_fraction must be in (0, 1), got {train_fraction}")
    if n < 2:
        raise TooFewRows(f"need at least 2 rows to split, have {n}")
    n_train = min(max(int(math.floor(n * train_fraction + 0.5)), 1), n - 1)

    keys = [ds.labels] + [ds.group_labels(a) for a in ds.protected_names]
    strata: dict[tuple, list[int]] = {}
    for i, key in enumerate(zip(*keys)):
        strata.setdefault(tuple(label_of(k) for k in key), []).append(i)
    order = sorted(strata)

    rng = make_rng(seed)
    warnings = []
    alloc: dict[tuple, int] = {}
    quota: dict[tuple, float] = {}
    for key in order:
        size = len(strata[key])
        quota[key] = size * train_fraction
        if size == 1:
            alloc[key] = 1
            warnings.append(f"stratum {list(key)} has a single row; assigned to train")
        else:
            alloc[key] = min(max(int(math.floor(quota[key])), 1), size - 1)

    def _adjust(step: int, strict: bool) -> int:
        nonlocal remaining
        while remaining * step > 0:
            lo_cap = 1 if strict else 0
            movable = [
                k for k in order if len(strata[k]) > 1
                and (alloc[k] + step <= len(strata[k]) - lo_cap if step > 0 else alloc[k] + step >= lo_cap)
            ]
            if not movable:
                break
            # largest shortfall gets the next row; largest surplus gives one back
            pick = max(movable, key=lambda k: step * (quota[k] - alloc[k]))
            alloc[pick] += step
            remaining -= step
        return remaining

    remaining = n_train - sum(alloc.values())
    step = 1 if remaining > 0 else -1
    if _adjust(step, strict=True):
        _adjust(step, strict=False)

    train_idx, test_idx = [], []
    for key in order:
        rows = np.asarray(strata[key])
        perm = rows[rng.permutation(len(rows))]
        train_idx.extend(perm[: alloc[key]].tolist())
        test_idx.extend(perm[alloc[key]:].tolist())
    for w in warnings:
        log.warning(w)
    info = {"seed": seed, "train_fraction": train_fraction, "warnings": warnings}
    train = ds.take(sorted(train_idx))
    test = ds.take(sorted(test_idx))
    train = dataclasses.replace(train, log={**train.log, "split": {**info, "part": "train"}})
    test = dataclasses.replace(test, log={**test.log, "split": {**info, "part": "test"}})
    return train, test


def drop_protected(ds: Dataset) -> Dataset:
    """Move protected columns out of the model inputs into the side table."""
    protected = [c for c in ds.schema if c.role is Role.PROTECTED]
    if not protected:
        return ds
    return dataclasses.replace(
        ds,
        schema=tuple(c for c in ds.schema if c.role is not Role.PROTECTED),
        columns={k: v for k, v in ds.columns.items() if k not in {c.name for c in protected}},
        side_schema=(*ds.side_schema, *protected),
        side_columns={**ds.side_columns, **{c.name: ds.columns[c.name] for c in protected}},
    )
