"""Categorical schemas, dense contingency tables, and table IO.

A table is stored as a flat int64 vector in canonical C order: the last
schema variable varies fastest, so ``np.ravel_multi_index``/``unravel_index``
with the schema's shape define the cell numbering.  Everything downstream
(streams, synthesis, metrics) identifies a cell by that flat index, which is
what makes per-cell reproducibility possible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ValidationError

# Flat cell indices must stay addressable as int64 with headroom.
_MAX_CELLS = 1 << 40


@dataclass(frozen=True)
class TableSchema:
    """Ordered categorical variables, each with its ordered category labels."""

    variables: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        try:
            normalized = tuple(
                (str(name), tuple(str(c) for c in cats))
                for name, cats in self.variables
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed schema variables: {exc}") from exc
        if not normalized:
            raise ValidationError("schema needs at least one variable")
        names = [n for n, _ in normalized]
        if len(set(names)) != len(names):
            raise ValidationError("schema variable names must be unique")
        for name, cats in normalized:
            if not name:
                raise ValidationError("schema variable names must be non-empty")
            if len(cats) < 2:
                raise ValidationError(
                    f"variable {name!r} needs at least two categories"
                )
            if len(set(cats)) != len(cats):
                raise ValidationError(
                    f"variable {name!r} has duplicate categories"
                )
            if any(c == "" for c in cats):
                raise ValidationError(
                    f"variable {name!r} has an empty category label"
                )
        object.__setattr__(self, "variables", normalized)
        k = 1
        for _, cats in normalized:
            k *= len(cats)
        if k > _MAX_CELLS:
            raise ValidationError(f"cell space of {k} cells is too large")
        object.__setattr__(self, "_codes", tuple(
            {c: i for i, c in enumerate(cats)} for _, cats in normalized
        ))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(cats) for _, cats in self.variables)

    @property
    def n_cells(self) -> int:
        k = 1
        for _, cats in self.variables:
            k *= len(cats)
        return k

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.variables):
            if n == name:
                return i
        raise ValidationError(f"unknown variable {name!r}")

    def categories(self, name: str) -> tuple[str, ...]:
        return self.variables[self.axis(name)][1]

    def cell_index(self, labels) -> int:
        """Flat index of the cell addressed by one label per variable."""
        labels = tuple(labels)
        if len(labels) != len(self.variables):
            raise ValidationError(
                f"expected {len(self.variables)} labels, got {len(labels)}"
            )
        idx = []
        for (name, _), code_map, lab in zip(self.variables, self._codes, labels):
            try:
                idx.append(code_map[str(lab)])
            except KeyError:
                raise ValidationError(
                    f"unknown category {lab!r} for variable {name!r}"
                ) from None
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def cell_labels(self, index: int) -> tuple[str, ...]:
        """Inverse of cell_index."""
        if not 0 <= index < self.n_cells:
            raise ValidationError(f"cell index {index} out of range")
        multi = np.unravel_index(index, self.shape)
        return tuple(
            cats[int(i)] for (_, cats), i in zip(self.variables, multi)
        )

    def to_json(self) -> str:
        return json.dumps(
            {"variables": [{"name": n, "categories": list(c)}
                           for n, c in self.variables]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TableSchema":
        try:
            doc = json.loads(text)
            variables = tuple(
                (v["name"], tuple(v["categories"])) for v in doc["variables"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed schema JSON: {exc}") from exc
        return cls(variables)


@dataclass(frozen=True)
class ContingencyTable:
    """Dense non-negative integer counts over a schema's cell space."""

    schema: TableSchema
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ValidationError("counts must be a flat vector")
        if counts.size != self.schema.n_cells:
            raise ValidationError(
                f"expected {self.schema.n_cells} cells, got {counts.size}"
            )
        if not np.issubdtype(counts.dtype, np.integer):
            as_int = counts.astype(np.int64)
            if not np.array_equal(as_int, counts):
                raise ValidationError("counts must be integers")
            counts = as_int
        if np.any(counts < 0):
            raise ValidationError("counts must be non-negative")
        counts = counts.astype(np.int64, copy=True)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        # Near the int64 ceiling (clamped synthetic cells) the fast
        # accumulator could wrap, so fall back to exact python ints.
        if float(self.counts.sum(dtype=np.float64)) >= 4.0e18:
            return sum(int(c) for c in self.counts)
        return int(self.counts.sum())

    @property
    def n_cells(self) -> int:
        return self.counts.size

    def reshaped(self) -> np.ndarray:
        return self.counts.reshape(self.schema.shape)

    def nonzero_cells(self) -> np.ndarray:
        return np.flatnonzero(self.counts)


@dataclass(frozen=True)
class CellHistogram:
    """Exact distribution of cell sizes: distinct sizes with frequencies.

    ``cap`` only affects display bucketing (sizes >= cap shown as "cap+");
    the stored sizes and frequencies are always exact, which is what the
    analytic metrics need.
    """

    sizes: np.ndarray
    freqs: np.ndarray
    cap: int = 11

    def __post_init__(self) -> None:
        sizes = np.asarray(self.sizes, dtype=np.int64)
        freqs = np.asarray(self.freqs, dtype=np.int64)
        if sizes.ndim != 1 or freqs.ndim != 1 or sizes.size != freqs.size:
            raise ValidationError("sizes and freqs must be matching vectors")
        if sizes.size == 0:
            raise ValidationError("histogram must not be empty")
        if np.any(sizes < 0):
            raise ValidationError("cell sizes must be non-negative")
        if np.any(np.diff(sizes) <= 0):
            raise ValidationError("sizes must be strictly increasing")
        if np.any(freqs <= 0):
            raise ValidationError("frequencies must be positive")
        if self.cap < 1:
            raise ValidationError("cap must be at least 1")
        sizes = sizes.copy(); sizes.setflags(write=False)
        freqs = freqs.copy(); freqs.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "freqs", freqs)

    @classmethod
    def from_table(cls, table: ContingencyTable, cap: int = 11) -> "CellHistogram":
        sizes, freqs = np.unique(table.counts, return_counts=True)
        return cls(sizes, freqs, cap)

    @property
    def n_cells(self) -> int:
        return int(self.freqs.sum())

    @property
    def proportions(self) -> np.ndarray:
        return self.freqs / self.n_cells

    @property
    def positive_sizes(self) -> np.ndarray:
        return self.sizes[self.sizes > 0]

    def freq_of(self, size: int) -> int:
        i = np.searchsorted(self.sizes, size)
        if i < self.sizes.size and self.sizes[i] == size:
            return int(self.freqs[i])
        return 0

    def proportion_of(self, size: int) -> float:
        """Share of cells with exactly this size (p(f = size))."""
        return self.freq_of(size) / self.n_cells

    def bucketed(self) -> pd.DataFrame:
        """Display rows with every size >= cap pooled into one bucket."""
        rows = []
        below = self.sizes < self.cap
        for s, f in zip(self.sizes[below], self.freqs[below]):
            rows.append((str(int(s)), int(f)))
        tail = int(self.freqs[~below].sum())
        if tail:
            rows.append((f"{self.cap}+", tail))
        df = pd.DataFrame(rows, columns=["size", "cells"])
        df["proportion"] = df["cells"] / self.n_cells
        return df

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"size": self.sizes, "freq": self.freqs})

    @classmethod
    def from_frame(cls, df: pd.DataFrame, cap: int = 11) -> "CellHistogram":
        if not {"size", "freq"} <= set(df.columns):
            raise ValidationError("histogram needs 'size' and 'freq' columns")
        sizes = pd.to_numeric(df["size"], errors="coerce").to_numpy()
        freqs = pd.to_numeric(df["freq"], errors="coerce").to_numpy()
        if np.any(pd.isna(sizes)) or np.any(pd.isna(freqs)):
            raise ValidationError("histogram has non-numeric entries")
        if np.any(sizes != np.floor(sizes)) or np.any(freqs != np.floor(freqs)):
            raise ValidationError("histogram entries must be integers")
        order = np.argsort(sizes)
        keep = freqs[order] > 0
        return cls(sizes.astype(np.int64)[order][keep],
                   freqs.astype(np.int64)[order][keep], cap)


def histogram(table: ContingencyTable, cap: int = 11) -> CellHistogram:
    """Exact cell-size histogram of a table."""
    return CellHistogram.from_table(table, cap)


def marginal(table: ContingencyTable, names) -> ContingencyTable:
    """Collapse to the listed variables (kept in original schema order)."""
    names = list(names)
    if not names:
        raise ValidationError("marginal needs at least one variable")
    if len(set(names)) != len(names):
        raise ValidationError("marginal variables must be distinct")
    keep_axes = sorted(table.schema.axis(n) for n in names)
    drop_axes = tuple(
        i for i in range(len(table.schema.variables)) if i not in keep_axes
    )
    if float(table.counts.sum(dtype=np.float64)) >= 4.0e18:
        raise ValidationError(
            "marginal sums would overflow int64 for this table"
        )
    collapsed = table.reshaped().sum(axis=drop_axes) if drop_axes \
        else table.reshaped()
    sub_schema = TableSchema(
        tuple(table.schema.variables[i] for i in keep_axes)
    )
    return ContingencyTable(sub_schema, np.ravel(collapsed, order="C"))


# ---------------------------------------------------------------------------
# CSV / JSON ingestion and emission


def _read_csv(source) -> pd.DataFrame:
    """CSV path or buffer to DataFrame; frames pass through untouched."""
    if isinstance(source, pd.DataFrame):
        return source
    try:
        return pd.read_csv(source, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise ValidationError(f"empty input: {exc}") from exc
    except (pd.errors.ParserError, OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"unreadable CSV: {exc}") from exc


def _column_check(df: pd.DataFrame, expected: tuple[str, ...],
                  what: str) -> None:
    have = list(df.columns)
    missing = [c for c in expected if c not in have]
    extra = [c for c in have if c not in expected]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing column(s) {missing}")
        if extra:
            parts.append(f"unexpected column(s) {extra}")
        raise ValidationError(f"{what}: " + "; ".join(parts))


def _encode_columns(df: pd.DataFrame, schema: TableSchema) -> np.ndarray:
    """Map label columns to flat cell indices, naming the first bad entry."""
    codes = []
    for name, cats in schema.variables:
        col = pd.Categorical(df[name], categories=cats)
        raw = col.codes
        if (raw < 0).any():
            row = int(np.argmax(raw < 0))
            raise ValidationError(
                f"row {row + 2}, column {name!r}: unknown category "
                f"{df[name].iloc[row]!r}"
            )
        codes.append(raw.astype(np.int64))
    if not codes[0].size:
        return np.empty(0, dtype=np.int64)
    return np.ravel_multi_index(tuple(codes), schema.shape).astype(np.int64)


def infer_schema(df: pd.DataFrame) -> TableSchema:
    """Schema from observed microdata labels, categories sorted per column."""
    variables = []
    for name in df.columns:
        cats = sorted(set(df[name]))
        if len(cats) < 2:
            raise ValidationError(
                f"cannot infer variable {name!r}: fewer than two distinct "
                "categories observed"
            )
        variables.append((name, tuple(cats)))
    return TableSchema(tuple(variables))


def ingest_microdata(source, schema: TableSchema | None = None) -> ContingencyTable:
    """Aggregate one-row-per-record CSV into a table.

    With no schema, categories are inferred from the data (sorted order).
    Row numbers in error messages are 1-based including the header line.
    """
    df = _read_csv(source)
    if schema is None:
        schema = infer_schema(df)
    _column_check(df, schema.names, "microdata")
    flat = _encode_columns(df, schema)
    counts = np.bincount(flat, minlength=schema.n_cells).astype(np.int64)
    return ContingencyTable(schema, counts)


def ingest_aggregated(source, schema: TableSchema) -> ContingencyTable:
    """Read (labels..., count) rows; absent cells are zero, duplicates fail."""
    df = _read_csv(source)
    _column_check(df, schema.names + ("count",), "aggregated table")
    raw = pd.to_numeric(df["count"], errors="coerce")
    if raw.isna().any():
        row = int(raw.isna().to_numpy().argmax())
        raise ValidationError(
            f"row {row + 2}, column 'count': not a number "
            f"({df['count'].iloc[row]!r})"
        )
    if np.issubdtype(raw.dtype, np.integer):
        # pandas keeps int64 when every value fits, preserving counts near
        # the int64 ceiling exactly.
        ints = raw.to_numpy(dtype=np.int64)
    else:
        vals = raw.to_numpy(dtype=np.float64)
        if np.any(vals != np.floor(vals)):
            row = int(np.argmax(vals != np.floor(vals)))
            raise ValidationError(
                f"row {row + 2}, column 'count': not an integer ({vals[row]!r})"
            )
        if np.any(np.abs(vals) >= 2.0**63):
            row = int(np.argmax(np.abs(vals) >= 2.0**63))
            raise ValidationError(
                f"row {row + 2}, column 'count': overflows int64 ({vals[row]!r})"
            )
        ints = vals.astype(np.int64)
    if np.any(ints < 0):
        row = int(np.argmax(ints < 0))
        raise ValidationError(
            f"row {row + 2}, column 'count': negative count ({int(ints[row])})"
        )
    flat = _encode_columns(df, schema)
    uniq, first = np.unique(flat, return_index=True)
    if uniq.size != flat.size:
        dupe_mask = np.ones(flat.size, dtype=bool)
        dupe_mask[first] = False
        row = int(np.argmax(dupe_mask))
        raise ValidationError(
            f"row {row + 2}: duplicate cell "
            f"{tuple(df[n].iloc[row] for n in schema.names)}"
        )
    counts = np.zeros(schema.n_cells, dtype=np.int64)
    counts[flat] = ints
    return ContingencyTable(schema, counts)


def _label_frame(schema: TableSchema, flat: np.ndarray) -> pd.DataFrame:
    multi = np.unravel_index(flat, schema.shape)
    data = {}
    for (name, cats), idx in zip(schema.variables, multi):
        data[name] = np.asarray(cats, dtype=object)[idx]
    return pd.DataFrame(data)


def emit_microdata(table: ContingencyTable) -> pd.DataFrame:
    """One row per individual; re-aggregating recovers the table exactly."""
    flat = np.repeat(np.arange(table.n_cells, dtype=np.int64), table.counts)
    return _label_frame(table.schema, flat)


def aggregated_frame(table: ContingencyTable,
                     include_zeros: bool = False) -> pd.DataFrame:
    """(labels..., count) rows in ascending cell order."""
    flat = np.arange(table.n_cells, dtype=np.int64) if include_zeros \
        else table.nonzero_cells()
    df = _label_frame(table.schema, flat)
    df["count"] = table.counts[flat]
    return df


def write_aggregated(table: ContingencyTable, path,
                     include_zeros: bool = False) -> None:
    aggregated_frame(table, include_zeros).to_csv(path, index=False)


def write_microdata(table: ContingencyTable, path) -> None:
    emit_microdata(table).to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Fixture generation


@dataclass(frozen=True)
class FixtureTarget:
    """Target cell-size distribution for generated test tables.

    Explicit (size, proportion) pairs plus an optional geometric tail for
    "tail_start and above"; any unassigned probability goes to size 0.
    """

    sizes: tuple[int, ...]
    proportions: tuple[float, ...]
    tail_start: int | None = None
    tail_proportion: float = 0.0
    tail_mean: float | None = None

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.sizes)
        props = tuple(float(p) for p in self.proportions)
        if len(sizes) != len(props):
            raise ValidationError("sizes and proportions must match")
        if len(set(sizes)) != len(sizes):
            raise ValidationError("duplicate sizes in target")
        if any(s < 0 for s in sizes):
            raise ValidationError("target sizes must be non-negative")
        if any(p < 0 for p in props):
            raise ValidationError("target proportions must be non-negative")
        total = sum(props) + self.tail_proportion
        if total > 1.0 + 1e-9:
            raise ValidationError(
                f"target proportions sum to {total}, more than 1"
            )
        if self.tail_proportion < 0.0:
            raise ValidationError("tail proportion must be non-negative")
        if self.tail_proportion > 0.0:
            if self.tail_start is None or self.tail_mean is None:
                raise ValidationError("tail needs tail_start and tail_mean")
            if self.tail_mean < self.tail_start:
                raise ValidationError("tail_mean must be >= tail_start")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "proportions", props)


def gen_fixture(schema: TableSchema, target: FixtureTarget,
                seed: int) -> ContingencyTable:
    """Draw iid cell sizes from the target distribution.

    Deterministic in (schema, target, seed).  The realized histogram differs
    from the target by ordinary multinomial noise, so measure it with
    :func:`histogram` rather than assuming the target.
    """
    k = schema.n_cells
    rng = np.random.default_rng(int(seed))

    values = list(target.sizes)
    probs = list(target.proportions)
    leftover = 1.0 - sum(probs) - target.tail_proportion
    if leftover > 1e-12:
        if 0 in values:
            probs[values.index(0)] += leftover
        else:
            values.append(0)
            probs.append(leftover)
    has_tail = target.tail_proportion > 0.0
    if has_tail:
        values.append(-1)  # sentinel resolved below
        probs.append(target.tail_proportion)

    probs_arr = np.asarray(probs, dtype=np.float64)
    probs_arr = probs_arr / probs_arr.sum()
    choice = rng.choice(len(values), size=k, p=probs_arr)
    counts = np.asarray(values, dtype=np.int64)[choice]
    if has_tail:
        tail_mask = choice == len(values) - 1
        n_tail = int(tail_mask.sum())
        if n_tail:
            p = 1.0 / (target.tail_mean - target.tail_start + 1.0)
            counts[tail_mask] = target.tail_start + rng.geometric(p, n_tail) - 1
    return ContingencyTable(schema, counts)


# ---------------------------------------------------------------------------
# The built-in benchmark shape: a five-variable administrative-style cell
# space of 3,468,640 cells whose size distribution mimics a large
# pupil-register cross-classification (90.4% empty cells, heavy spike at
# small counts, a long geometric-style tail above 10).

_BENCHMARK_FREQS = {
    0: 3_134_980, 1: 119_917, 2: 51_412, 3: 25_952, 4: 19_450, 5: 13_076,
    6: 10_345, 7: 7_947, 8: 7_077, 9: 5_809, 10: 5_163,
}
_BENCHMARK_TAIL_FREQ = 67_512
_BENCHMARK_CELLS = 3_468_640


def benchmark_schema() -> TableSchema:
    """AREA(326) x ETHNICITY(20) x SEX(4) x AGE(19) x LANGUAGE(7)."""
    return TableSchema((
        ("AREA", tuple(f"A{i:03d}" for i in range(1, 327))),
        ("ETHNICITY", tuple(f"E{i:02d}" for i in range(1, 21))),
        ("SEX", ("F", "M", "I", "U")),
        ("AGE", tuple(str(a) for a in range(4, 23))),
        ("LANGUAGE", tuple(f"L{i}" for i in range(1, 8))),
    ))


def benchmark_target(tail_mean: float = 25.0) -> FixtureTarget:
    """Cell-size target reproducing the built-in benchmark shape."""
    sizes = tuple(_BENCHMARK_FREQS)
    props = tuple(f / _BENCHMARK_CELLS for f in _BENCHMARK_FREQS.values())
    return FixtureTarget(
        sizes, props,
        tail_start=11,
        tail_proportion=_BENCHMARK_TAIL_FREQ / _BENCHMARK_CELLS,
        tail_mean=tail_mean,
    )
