"""CSV ingestion: header row, named target column, integer-encoded categoricals.

Encoding policy (documented artifact behaviour, not a modelling claim):
a column is numeric iff every non-missing cell parses as a finite float;
non-numeric feature columns and the target are integer-encoded in order of
first appearance. Missing tokens are rejected unless ``impute_median`` is
set, in which case numeric columns take their column median and missing
categorical cells become a category of their own.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Dataset
from .errors import IngestError, MissingValues

MISSING_TOKENS = {"", "na", "nan", "null", "?"}


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _try_float(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v


def load_csv_dataset(path: str | Path, target: str, *, dataset_id: str | None = None,
                     group: str | None = None, impute_median: bool = False) -> Dataset:
    """Read a headered CSV into a Dataset.

    ``target`` names the label column; ``group`` optionally names the
    feature column whose categories define worst-group subpopulations.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise IngestError(f"{path}: need a header row and at least one data row")
    header, data = rows[0], rows[1:]
    width = len(header)
    for i, row in enumerate(data):
        if len(row) != width:
            raise IngestError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")

    if target not in header:
        raise IngestError(f"{path}: target column {target!r} not in header")
    target_col = header.index(target)
    group_col_raw: int | None = None
    if group is not None:
        if group == target:
            raise IngestError("group column cannot be the target column")
        if group not in header:
            raise IngestError(f"{path}: group column {group!r} not in header")
        group_col_raw = header.index(group)

    feature_cols = [j for j in range(width) if j != target_col]

    # labels: first-appearance integer codes, missing never allowed
    codes: dict[str, int] = {}
    labels = np.empty(len(data), dtype=np.int64)
    for i, row in enumerate(data):
        cell = row[target_col].strip()
        if _is_missing(cell):
            raise MissingValues(f"{path}: missing target at row {i + 2}")
        labels[i] = codes.setdefault(cell, len(codes))
    if len(codes) < 2:
        raise IngestError(f"{path}: target has {len(codes)} distinct value(s); need >= 2")

    features = np.empty((len(data), len(feature_cols)), dtype=np.float64)
    for out_j, j in enumerate(feature_cols):
        column = [row[j] for row in data]
        missing = [i for i, cell in enumerate(column) if _is_missing(cell)]
        parsed = {i: _try_float(cell) for i, cell in enumerate(column) if i not in set(missing)}
        numeric = all(v is not None for v in parsed.values())
        if numeric and any(v is not None and not math.isfinite(v) for v in parsed.values()):
            raise IngestError(f"{path}: non-finite value in column {header[j]!r}")
        if numeric:
            if missing and not impute_median:
                raise MissingValues(
                    f"{path}: column {header[j]!r} has missing cells (set impute_median)")
            values = np.full(len(data), np.nan)
            for i, v in parsed.items():
                values[i] = v
            if missing:
                if not parsed:
                    raise IngestError(f"{path}: column {header[j]!r} entirely missing")
                values[np.isnan(values)] = float(np.median(list(parsed.values())))
            features[:, out_j] = values
        else:
            if missing and not impute_median:
                raise MissingValues(
                    f"{path}: column {header[j]!r} has missing cells (set impute_median)")
            cat_codes: dict[str, int] = {}
            for i, cell in enumerate(column):
                key = "" if _is_missing(cell) else cell.strip()
                features[i, out_j] = cat_codes.setdefault(key, len(cat_codes))

    group_column = None
    if group_col_raw is not None:
        group_column = feature_cols.index(group_col_raw)

    return Dataset(id=dataset_id or path.stem, features=features, labels=labels,
                   class_count=len(codes), group_column=group_column)
