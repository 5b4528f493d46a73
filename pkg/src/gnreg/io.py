"""CSV dataset schema and JSON serialization used by the command line.

Dataset CSV: header ``y,x1,...,xp,block``; UTF-8, '.' decimal, no missing
values; ``block`` is a 1-based integer and labels must cover 1..m.  Fit
results and ground-truth sidecars serialize to JSON with sorted keys so
outputs are byte-stable and round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import BlockPartition, Dataset, DistributionFamily, FitResult


class CsvSchemaError(ValueError):
    """Malformed dataset CSV; carries the offending line number and content."""

    def __init__(self, message: str, line_no: int | None = None, line: str | None = None):
        detail = message
        if line_no is not None:
            detail += f" (line {line_no}"
            if line is not None:
                detail += f": {line!r}"
            detail += ")"
        super().__init__(detail)
        self.line_no = line_no
        self.line = line


def _format_float(v: float) -> str:
    return repr(float(v))


def write_dataset_csv(path, data: Dataset) -> None:
    path = Path(path)
    labels = np.empty(data.n_rows, dtype=int)
    for i, idx in enumerate(data.blocks.blocks):
        labels[idx] = i + 1
    header = ["y"] + [f"x{k + 1}" for k in range(data.p)] + ["block"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(data.n_rows):
            row = [_format_float(data.y[r])]
            row += [_format_float(v) for v in data.x[r]]
            row.append(str(int(labels[r])))
            writer.writerow(row)


def read_dataset_csv(path) -> Dataset:
    """Parse a dataset CSV, failing fast with the offending line on errors."""
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError("empty file", line_no=1) from None
        if len(header) < 3 or header[0] != "y" or header[-1] != "block":
            raise CsvSchemaError(
                "header must be y,x1,...,xp,block", line_no=1, line=",".join(header)
            )
        p = len(header) - 2
        expected_x = [f"x{k + 1}" for k in range(p)]
        if header[1:-1] != expected_x:
            raise CsvSchemaError(
                "covariate columns must be named x1..xp in order",
                line_no=1,
                line=",".join(header),
            )
        ys, xs, labels = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != p + 2:
                raise CsvSchemaError(
                    f"expected {p + 2} fields, got {len(row)}",
                    line_no=line_no,
                    line=",".join(row),
                )
            try:
                yv = float(row[0])
                xv = [float(v) for v in row[1:-1]]
            except ValueError:
                raise CsvSchemaError(
                    "non-numeric value", line_no=line_no, line=",".join(row)
                ) from None
            if not np.isfinite(yv) or not all(np.isfinite(v) for v in xv):
                raise CsvSchemaError(
                    "non-finite value", line_no=line_no, line=",".join(row)
                )
            try:
                blk = int(row[-1])
            except ValueError:
                raise CsvSchemaError(
                    "block label must be an integer", line_no=line_no, line=",".join(row)
                ) from None
            if blk < 1:
                raise CsvSchemaError(
                    "block labels are 1-based", line_no=line_no, line=",".join(row)
                )
            ys.append(yv)
            xs.append(xv)
            labels.append(blk)
    if not ys:
        raise CsvSchemaError("no data rows", line_no=2)
    label_arr = np.array(labels)
    m = int(label_arr.max())
    block_rows = []
    for i in range(1, m + 1):
        rows = np.flatnonzero(label_arr == i)
        if rows.size == 0:
            raise CsvSchemaError(f"block {i} has no rows but block {m} exists")
        block_rows.append(rows)
    return Dataset(
        y=np.array(ys),
        x=np.array(xs),
        blocks=BlockPartition(tuple(block_rows)),
    )


def _canonical_dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def fit_result_to_json(result: FitResult) -> str:
    payload = {
        "beta": [float(v) for v in result.beta],
        "mu_upper_hat": result.mu_upper_hat,
        "objective_value": result.objective_value,
        "active_block": result.active_block,
        "iterations": result.iterations,
        "converged": result.converged,
        "diagnostics": _jsonable(result.diagnostics),
    }
    return _canonical_dumps(payload)


def fit_result_from_json(text: str) -> FitResult:
    payload = json.loads(text)
    return FitResult(
        beta=np.array(payload["beta"], dtype=float),
        objective_value=payload["objective_value"],
        active_block=payload["active_block"],
        iterations=payload["iterations"],
        converged=payload["converged"],
        mu_upper_hat=payload["mu_upper_hat"],
        diagnostics=payload["diagnostics"],
    )


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def truth_to_json(beta0, family: DistributionFamily, experiment: str, seed: int) -> str:
    payload = {
        "experiment": experiment,
        "seed": seed,
        "beta0": [float(v) for v in np.asarray(beta0)],
        "family": {
            "means": [mb.mu for mb in family.members],
            "variances": [mb.sigma2 for mb in family.members],
        },
    }
    return _canonical_dumps(payload)
