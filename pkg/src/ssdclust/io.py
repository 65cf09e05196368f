"""Reading and writing distance matrices, labels and reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_matrix_csv(D, path) -> None:
    """N rows of N comma-separated doubles, written with ``repr``."""
    D = np.asarray(D, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in D:
            w.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    D = np.array(rows, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"{path}: matrix is not square")
    return D


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def save_matrix_json(D, path, metadata: dict | None = None) -> None:
    """JSON container ``{format_version, n, distances, metadata}``.

    Non-finite entries are written as the bare tokens ``Infinity``/``NaN``
    that Python's json module reads back.
    """
    D = np.asarray(D, dtype=float)
    doc = {
        "format_version": FORMAT_VERSION,
        "n": int(D.shape[0]),
        "distances": D.tolist(),
        "metadata": _jsonable(metadata or {}),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_matrix_json(path) -> tuple[np.ndarray, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    return np.array(doc["distances"], dtype=float), doc.get("metadata", {})


def load_matrix(path) -> tuple[np.ndarray, dict]:
    """Load either matrix format, picked by file extension."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_matrix_json(path)
    return load_matrix_csv(path), {}


def save_labels_csv(labels, path, header: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", header])
        for i, lab in enumerate(np.asarray(labels).tolist()):
            w.writerow([i, lab])


def load_labels_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        pairs = sorted((int(i), int(lab)) for i, lab in reader)
    return np.array([lab for _, lab in pairs], dtype=np.int64)


def save_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True), encoding="utf-8")
