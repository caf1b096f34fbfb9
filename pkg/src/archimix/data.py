"""Dataset containers, rank normalization, splits, censoring and CSV I/O.

Point CSVs hold d numeric columns, an optional single header line, UTF-8.
Interval CSVs hold 2d columns interleaved as lo_1, hi_1, ..., lo_d, hi_d.
Floats are written with 17 significant digits so a write/read round trip
is bit exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Point data, one row per observation.

    normalized marks pseudo-observations (ranks scaled into the open unit
    cube); raw data must be normalized before it can be fit.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DataError("dataset needs a non-empty (n, d) value matrix")
        if not np.all(np.isfinite(v)):
            raise DataError("dataset has non-finite entries")
        if self.normalized and (np.any(v <= 0.0) or np.any(v >= 1.0)):
            raise DataError("normalized data must lie strictly inside the unit cube")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CensoredDataset:
    """Interval data: one [lower, upper] box per observation.

    noise_level records the censoring half-width the intervals were built
    with, when known.
    """

    lower: np.ndarray
    upper: np.ndarray
    noise_level: float | None = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 2 or lo.shape != hi.shape or lo.shape[0] < 1:
            raise DataError("interval dataset needs matching (n, d) bound matrices")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DataError("interval dataset has non-finite entries")
        if np.any(lo < 0.0) or np.any(hi > 1.0) or np.any(lo > hi):
            raise DataError("intervals must satisfy 0 <= lower <= upper <= 1")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @property
    def d(self) -> int:
        return self.lower.shape[1]


def rank_normalize(data) -> Dataset:
    """Pseudo-observations: per column, rank_i / (n + 1), ties averaged.

    A constant column carries no dependence information and is rejected.
    """
    values = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    ds = Dataset(values)  # validates
    if ds.n < 2:
        raise DataError("rank normalization needs at least 2 rows")
    spans = ds.values.max(axis=0) - ds.values.min(axis=0)
    if np.any(spans == 0.0):
        col = int(np.argmax(spans == 0.0))
        raise DataError(f"column {col + 1} is constant; no dependence information")
    ranks = rankdata(ds.values, method="average", axis=0)
    return Dataset(ranks / (ds.n + 1.0), normalized=True)


def split(data: Dataset, n_train: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded partition into (train, test), each part rank-normalized on its own.

    Normalizing per part (rather than inheriting joint ranks) keeps each
    part's pseudo-observations exact: every column is the grid i/(n+1).
    """
    n_train = int(n_train)
    if not 1 <= n_train < data.n:
        raise DataError(f"n_train must be in [1, {data.n - 1}], got {n_train}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    perm = rng.permutation(data.n)
    return (rank_normalize(data.values[perm[:n_train]]),
            rank_normalize(data.values[perm[n_train:]]))


def censor(data: Dataset, noise_level: float, seed: int) -> CensoredDataset:
    """Interval-censor points: [u - a, u + b] with a, b ~ U[0, noise_level].

    Per-entry independent noise, clipped into [0, 1].
    """
    lam = float(noise_level)
    if not lam > 0.0:
        raise DataError("noise level must be > 0")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    delta = rng.random((data.n, data.d, 2)) * lam
    lo = np.clip(data.values - delta[:, :, 0], 0.0, 1.0)
    hi = np.clip(data.values + delta[:, :, 1], 0.0, 1.0)
    return CensoredDataset(lo, hi, noise_level=lam)


def inject_outliers(data: Dataset, rate: float = 0.01, seed: int = 0) -> Dataset:
    """Append floor(n * rate) uniform rows (independence noise) to the data."""
    rate = float(rate)
    if rate < 0.0:
        raise DataError("outlier rate must be >= 0")
    count = int(data.n * rate)
    if count == 0:
        return data
    rng = np.random.Generator(np.random.Philox(int(seed)))
    extra = rng.random((count, data.d))
    eps = 1.0 / (data.n + 1.0)
    extra = np.clip(extra, eps, 1.0 - eps)
    return Dataset(np.vstack([data.values, extra]), normalized=data.normalized)


def flip(data: Dataset, coords) -> Dataset:
    """Reflect the listed coordinates: u -> 1 - u."""
    coords = sorted({int(c) for c in coords})
    if any(c < 0 or c >= data.d for c in coords):
        raise DataError("flip coordinate out of range")
    v = data.values.copy()
    for c in coords:
        v[:, c] = 1.0 - v[:, c]
    return Dataset(v, normalized=data.normalized)


# -- CSV I/O -----------------------------------------------------------------

def _parse_rows(path: str, expect_cols: int | None = None):
    rows = []
    bad = []
    seen_content = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            first = not seen_content
            seen_content = True
            fields = [f.strip() for f in line.split(",")]
            try:
                row = [float(f) for f in fields]
            except ValueError:
                if first:
                    continue  # optional header line
                bad.append(lineno)
                continue
            rows.append((lineno, row))
    if bad:
        shown = ", ".join(str(b) for b in bad[:10])
        more = "" if len(bad) <= 10 else f" (+{len(bad) - 10} more)"
        raise DataError(f"{path}: malformed rows at lines {shown}{more}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    uneven = [ln for ln, row in rows if len(row) != width]
    if uneven:
        raise DataError(f"{path}: inconsistent column counts at lines "
                        + ", ".join(str(u) for u in uneven[:10]))
    if expect_cols is not None and width != expect_cols:
        raise DataError(f"{path}: expected {expect_cols} columns, found {width}")
    return np.array([row for _, row in rows], dtype=float)


def read_points(path: str, normalized: bool = True) -> Dataset:
    """Read a point CSV; malformed lines are reported and fail the file."""
    values = _parse_rows(path)
    try:
        return Dataset(values, normalized=normalized)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def read_intervals(path: str) -> CensoredDataset:
    """Read an interval CSV with interleaved lo, hi column pairs."""
    values = _parse_rows(path)
    if values.shape[1] % 2 != 0:
        raise DataError(f"{path}: interval files need an even column count")
    try:
        return CensoredDataset(values[:, 0::2], values[:, 1::2])
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _write_rows(path: str, rows: np.ndarray, header: str | None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def write_points(path: str, data: Dataset, header: bool = True) -> None:
    head = ",".join(f"u{j + 1}" for j in range(data.d)) if header else None
    _write_rows(path, data.values, head)


def write_intervals(path: str, data: CensoredDataset, header: bool = True) -> None:
    cols = []
    for j in range(data.d):
        cols.append(data.lower[:, j])
        cols.append(data.upper[:, j])
    head = ",".join(f"lo{j + 1},hi{j + 1}" for j in range(data.d)) if header else None
    _write_rows(path, np.column_stack(cols), head)
