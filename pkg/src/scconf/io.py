"""File formats: CSV datasets and JSON artifacts.

CSV layouts (one header row, float columns written with ``repr`` so values
round-trip exactly):

* confidence data: ``x0,...,x{d-1},r0,...,r{K-1}``
* unlabeled data:  ``x0,...,x{d-1}``
* labeled data:    ``x0,...,x{d-1},y`` with 1-based integer labels

JSON artifacts are written with sorted keys and a fixed layout so identical
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .net import MlpModel
from .ratio import RatioModel
from .synthetic import GaussianMixtureSpec, default_benchmark_spec
from .validation import check_confidence_matrix, check_labels, check_matrix

__all__ = [
    "write_confidence_csv",
    "read_confidence_csv",
    "write_unlabeled_csv",
    "read_unlabeled_csv",
    "write_labeled_csv",
    "read_labeled_csv",
    "dump_json",
    "load_json",
    "save_model",
    "load_model",
    "save_ratio",
    "load_ratio",
    "save_spec",
    "load_spec",
]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: CSV has a header but no rows")
    return header, rows


def _split_header(header, path):
    """Count leading x-columns and trailing r-columns / y column."""
    pattern = re.compile(r"^x(\d+)$")
    d = 0
    while d < len(header) and pattern.match(header[d]):
        d += 1
    if d == 0:
        raise ValueError(f"{path}: header must start with x0,x1,...  got {header!r}")
    return d


def write_confidence_csv(path, x, r) -> None:
    x = check_matrix(x, name="x")
    r = check_confidence_matrix(r, name="r")
    if x.shape[0] != r.shape[0]:
        raise ValueError("x and r disagree in length")
    header = [f"x{j}" for j in range(x.shape[1])] + [f"r{j}" for j in range(r.shape[1])]
    rows = (
        [repr(float(v)) for v in xi] + [repr(float(v)) for v in ri]
        for xi, ri in zip(x, r)
    )
    _write_rows(path, header, rows)


def read_confidence_csv(path):
    header, rows = _read_csv(path)
    d = _split_header(header, path)
    k = len(header) - d
    if k < 2 or header[d:] != [f"r{j}" for j in range(k)]:
        raise ValueError(f"{path}: expected r0..r{{K-1}} after the x-columns, got {header!r}")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: row width disagrees with header")
    return check_matrix(data[:, :d], name="x"), check_confidence_matrix(data[:, d:], name="r")


def write_unlabeled_csv(path, x) -> None:
    x = check_matrix(x, name="x")
    header = [f"x{j}" for j in range(x.shape[1])]
    _write_rows(path, header, ([repr(float(v)) for v in xi] for xi in x))


def read_unlabeled_csv(path) -> np.ndarray:
    header, rows = _read_csv(path)
    d = _split_header(header, path)
    if d != len(header):
        raise ValueError(f"{path}: unexpected trailing columns {header[d:]!r}")
    data = np.array([[float(v) for v in row] for row in rows])
    return check_matrix(data, name="x")


def write_labeled_csv(path, x, y) -> None:
    x = check_matrix(x, name="x")
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValueError("y must be 1-D and match x in length")
    if y.min() < 1:
        raise ValueError("labels are 1-based")
    header = [f"x{j}" for j in range(x.shape[1])] + ["y"]
    rows = ([repr(float(v)) for v in xi] + [str(int(yi))] for xi, yi in zip(x, y))
    _write_rows(path, header, rows)


def read_labeled_csv(path, n_classes=None):
    header, rows = _read_csv(path)
    d = _split_header(header, path)
    if header[d:] != ["y"]:
        raise ValueError(f"{path}: expected a single trailing y column, got {header!r}")
    x = np.array([[float(v) for v in row[:d]] for row in rows])
    y = np.array([int(row[d]) for row in rows])
    x = check_matrix(x, name="x")
    y = check_labels(y, n_classes if n_classes is not None else int(y.max()), name="y")
    return x, y


# ---------------------------------------------------------------------------
# JSON artifacts
# ---------------------------------------------------------------------------


def dump_json(obj, path) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_model(model: MlpModel, path) -> None:
    dump_json(model.to_dict(), path)


def load_model(path) -> MlpModel:
    return MlpModel.from_dict(load_json(path))


def save_ratio(ratio: RatioModel, path) -> None:
    dump_json(ratio.to_dict(), path)


def load_ratio(path) -> RatioModel:
    return RatioModel.from_dict(load_json(path))


def save_spec(spec: GaussianMixtureSpec, path) -> None:
    dump_json(spec.to_dict(), path)


def load_spec(source) -> GaussianMixtureSpec:
    """Load a mixture spec from a JSON file; the literal string "default"
    resolves to the built-in benchmark spec."""
    if source == "default":
        return default_benchmark_spec()
    return GaussianMixtureSpec.from_dict(load_json(source))
