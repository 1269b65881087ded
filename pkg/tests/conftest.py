"""Shared fixtures: small schemas and benchmark-shaped tables."""

import numpy as np
import pytest

from countsynth import (
    ContingencyTable,
    TableSchema,
    benchmark_target,
    gen_fixture,
)


@pytest.fixture(scope="session")
def small_schema():
    return TableSchema((
        ("REGION", ("N", "S", "E", "W")),
        ("GROUP", ("g1", "g2", "g3")),
        ("BAND", ("b1", "b2")),
    ))


@pytest.fixture(scope="session")
def small_table(small_schema):
    counts = np.array(
        [4, 0, 1, 2, 0, 0,
         3, 1, 0, 0, 2, 5,
         0, 0, 6, 1, 1, 0,
         2, 3, 0, 0, 0, 1],
        dtype=np.int64,
    )
    return ContingencyTable(small_schema, counts)


def grid_schema(rows: int, cols: int) -> TableSchema:
    """A two-variable schema with rows x cols cells."""
    return TableSchema((
        ("A", tuple(f"a{i:03d}" for i in range(rows))),
        ("B", tuple(f"b{i:03d}" for i in range(cols))),
    ))


@pytest.fixture(scope="session")
def bench10k():
    """10,000-cell fixture with the benchmark cell-size shape."""
    return gen_fixture(grid_schema(100, 100), benchmark_target(), seed=20240901)
