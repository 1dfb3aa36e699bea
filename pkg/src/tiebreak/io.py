"""Dataset ingestion, standardization, presets and result writers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError, ZeroVariance

# Logistic-regression coefficients for the MIMIC-IV-ED triage example:
# intercept, then (vital, vital^2) pairs for the six vitals in this order.
MIMIC_VITALS = ("temperature", "heart_rate", "resp_rate", "o2_sat", "sbp", "dbp")
MIMIC_TABLE1 = (
    ("intercept", -0.74),
    ("temperature", -0.32), ("temperature^2", 0.22),
    ("heart_rate", -0.03), ("heart_rate^2", 0.67),
    ("resp_rate", -0.03), ("resp_rate^2", 0.54),
    ("o2_sat", 0.03), ("o2_sat^2", 0.36),
    ("sbp", 0.01), ("sbp^2", 0.17),
    ("dbp", -0.11), ("dbp^2", -0.13),
)

# Simulation covariance used for the five-covariate synthetic study.
SIM_SIGMA = np.array([
    [2.04, 1.54, 1.99, 1.19, 0.90],
    [1.54, 1.62, 1.81, 1.30, 0.88],
    [1.99, 1.81, 2.65, 1.66, 1.63],
    [1.19, 1.30, 1.66, 1.53, 0.85],
    [0.90, 0.88, 1.63, 0.85, 1.31],
])
SIM_ETA_PRINTED = (7.0, 5.0, 10.0, 8.0, 3.0, 2.0)
SIM_ETA = np.array(SIM_ETA_PRINTED[:5])
SIM_N = 500


def mimic_eta(layout: str = "interleaved") -> np.ndarray:
    """The 12 MIMIC slope coefficients, intercept dropped.

    ``layout="interleaved"`` follows the table (x1, x1^2, x2, x2^2, ...);
    ``"appended"`` matches ``standardize(add_squares=True)`` output
    (x1..x6, x1^2..x6^2).
    """
    coef = np.array([c for _, c in MIMIC_TABLE1[1:]])
    if layout == "interleaved":
        return coef
    if layout == "appended":
        return np.r_[coef[0::2], coef[1::2]]
    raise ValueError(f"unknown layout {layout!r}")


@dataclass
class Dataset:
    ids: list[str]
    X: np.ndarray
    columns: list[str]


def ingest(path) -> Dataset:
    """Read a CSV with header ``id,x1,...,xd`` into a float matrix.

    Raises SchemaError naming the offending row/column for blank or
    non-numeric cells, ragged rows, or an empty file.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "id":
            raise SchemaError(f"{path}: header must be 'id' followed by covariate columns, got {header}")
        d = len(header) - 1
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise SchemaError(f"{path}: line {lineno} has {len(row)} cells, expected {d + 1}")
            vals = []
            for j, cell in enumerate(row[1:], start=1):
                cell = cell.strip()
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not cell or not math.isfinite(v):
                    raise SchemaError(f"{path}: line {lineno}, column {header[j]!r}: "
                                      f"{'missing' if not cell else 'non-numeric'} value {cell!r}")
                vals.append(v)
            ids.append(row[0].strip())
            rows.append(vals)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate ids")
    return Dataset(ids, np.array(rows, dtype=np.float64), header[1:])


@dataclass
class Standardization:
    """Record of the column transform applied before scoring."""

    center_scale: bool = False
    add_squares: bool = False
    means: list[float] = field(default_factory=list)
    scales: list[float] = field(default_factory=list)
    square_means: list[float] = field(default_factory=list)
    square_scales: list[float] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)


def _center_scale(X: np.ndarray, names) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    bad = [names[j] for j in np.flatnonzero(~(sd > 0))]
    if bad:
        raise ZeroVariance(f"zero-variance column(s): {', '.join(bad)}")
    return (X - mean) / sd, mean, sd


def standardize(X, columns=None, center_scale: bool = True,
                add_squares: bool = False) -> tuple[np.ndarray, Standardization]:
    """Scale columns to mean 0, sample variance 1; optionally append squares.

    Squares are taken of the scaled columns and are themselves rescaled to
    mean 0, variance 1.
    """
    X = np.asarray(X, dtype=np.float64)
    columns = list(columns) if columns is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    rec = Standardization(center_scale, add_squares)
    if center_scale:
        X, mean, sd = _center_scale(X, columns)
        rec.means, rec.scales = mean.tolist(), sd.tolist()
    if add_squares:
        sq_names = [f"{c}^2" for c in columns]
        Q, qm, qs = _center_scale(X * X, sq_names)
        X = np.hstack([X, Q])
        columns = columns + sq_names
        rec.square_means, rec.square_scales = qm.tolist(), qs.tolist()
    rec.columns = columns
    return X, rec


def fmt(v) -> str:
    """Round-trip float formatting (17 significant digits)."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def write_dataset(path, ids, X) -> None:
    write_csv(path, ["id"] + [f"x{j + 1}" for j in range(X.shape[1])],
              ([i, *row] for i, row in zip(ids, X)))


def read_probs(path) -> tuple[list[str], np.ndarray, list[str] | None]:
    """Read ``probs.csv`` (columns id, p, optionally running and stratum)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "p" not in reader.fieldnames:
            raise SchemaError(f"{path}: expected columns 'id' and 'p'")
        ids, ps, strata = [], [], []
        has_strata = "stratum" in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            try:
                v = float(row["p"])
            except (TypeError, ValueError):
                v = math.nan
            if not 0.0 <= v <= 1.0:
                raise SchemaError(f"{path}: line {lineno}: bad probability {row['p']!r}")
            ps.append(v)
            ids.append(row["id"])
            if has_strata:
                strata.append(row["stratum"])
    return ids, np.array(ps), (strata if has_strata else None)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
