"""Plain-text matrix and label files.

Matrices: one row per line, comma-separated, no header, samples as columns.
Labels: one base-10 integer per line. Floats are written with 17
significant digits so a write/read round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import FitReport, FitResult

MODEL_FILES = ("Z", "P", "E", "W", "theta")


class ParseError(ValueError):
    """Malformed matrix or label file; the message names the offending line."""


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    rows = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                row = [float(f) for f in fields]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric entry") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"{path}:{lineno}: row has {len(row)} entries, expected {width}"
                )
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def write_matrix(path, A) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    with Path(path).open("w") as fh:
        for row in A:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def read_labels(path) -> np.ndarray:
    path = Path(path)
    labels = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line, 10))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a base-10 integer: {line!r}") from None
    return np.array(labels, dtype=np.int64)


def write_labels(path, labels) -> None:
    with Path(path).open("w") as fh:
        for v in np.asarray(labels).ravel():
            fh.write(f"{int(v)}\n")


def write_json(path, obj) -> None:
    with Path(path).open("w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(directory):
    """Read the five model matrices written by ``rbdlr fit``."""
    directory = Path(directory)
    mats = {}
    for name in MODEL_FILES:
        path = directory / f"{name}.csv"
        if not path.exists():
            raise FileNotFoundError(f"model file missing: {path}")
        mats[name] = read_matrix(path)
    mats["theta"] = mats["theta"].reshape(-1, 1)
    report_path = directory / "report.json"
    report = FitReport(iterations=0, converged=False)
    if report_path.exists():
        raw = json.loads(report_path.read_text())
        report = FitReport(
            iterations=raw.get("iterations", 0),
            converged=raw.get("converged", False),
            residual_history=[tuple(r) for r in raw.get("residual_history", [])],
            objective_history=list(raw.get("objective_history", [])),
            wall_time_seconds=raw.get("wall_time_seconds", 0.0),
        )
    return FitResult(report=report, **mats)


def save_model(directory, result, extra: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in MODEL_FILES:
        write_matrix(directory / f"{name}.csv", getattr(result, name))
    rep = result.report
    r1, r2 = rep.final_residuals
    payload = dict(extra)
    payload.update(
        iterations=rep.iterations,
        converged=rep.converged,
        final_residuals=[r1, r2],
        residual_history=[list(r) for r in rep.residual_history],
        objective_history=list(rep.objective_history),
        wall_time_seconds=rep.wall_time_seconds,
    )
    write_json(directory / "report.json", payload)
