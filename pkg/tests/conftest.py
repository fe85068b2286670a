import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from simclone.rng import substream
from simclone.table_io import Table

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_seed_table(k: int, min_rows: int = 16, max_rows: int = 28) -> Table:
    """A synthetic seed table with its own value ranges and token vocabulary,
    so unrelated seeds share almost no values. Row and column counts sit in
    the same range so neither axis' pooled features saturate first."""
    rng = substream(0x5EED, k, 0)
    n_rows = int(rng.integers(min_rows, max_rows + 1))
    n_num = int(rng.integers(10, 14))
    n_str = int(rng.integers(10, 14))
    mu = rng.normal(0.0, 40.0, size=n_num)
    scale = rng.uniform(0.5, 12.0, size=n_num)
    num = mu + scale * rng.standard_normal((n_rows, n_num))
    vocab_sizes = [int(rng.integers(6, 20)) for _ in range(n_str)]
    cells = []
    for i in range(n_rows):
        row = [repr(round(float(v), 4)) for v in num[i]]
        for c in range(n_str):
            row.append(f"w{k}c{c}_{int(rng.integers(0, vocab_sizes[c]))}")
        cells.append(row)
    return Table(f"seed{k:03d}", "", cells)


@pytest.fixture(scope="session")
def small_seed_tables():
    """Eight compact seed tables for fast pipeline tests."""
    return [make_seed_table(k, min_rows=18, max_rows=30) for k in range(8)]


def random_string_units(rng, n_units, max_len=6, alphabet=("a", "b", "c", "d", "e", "", "zz")):
    units = []
    for _ in range(n_units):
        length = int(rng.integers(0, max_len + 1))
        units.append([str(alphabet[int(rng.integers(0, len(alphabet)))])
                      for _ in range(length)])
    return units


def random_float_units(rng, n_units, max_len=6):
    units = []
    for _ in range(n_units):
        length = int(rng.integers(0, max_len + 1))
        units.append([float(round(rng.normal(0, 5), 3)) for _ in range(length)])
    return units
