"""Streaming readers and writers for cell files and result tables.

Cell files are newline-delimited JSON, one cell per line with no header.
Result tables are CSV. Names ending in ``.gz`` are gzip-compressed; gzip
output carries no timestamp so identical content gives identical bytes.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from .analysis import ResultRow
from .nas_graph import CellGraph, NetworkSpec, canonical_hash, expand_network, validate_cell

RESULT_COLUMNS = (
    "cell_hash", "accel", "latency_ms", "energy_mj", "total_params", "total_macs", "depth",
    "width", "n_conv3x3", "n_conv1x1", "n_maxpool3x3", "bound_fraction_memory",
)
OPTIONAL_RESULT_COLUMNS = ("mean_validation_accuracy",)
_INT_COLUMNS = {"total_params", "total_macs", "depth", "width", "n_conv3x3", "n_conv1x1", "n_maxpool3x3"}
_FLOAT_COLUMNS = {"latency_ms", "energy_mj", "bound_fraction_memory"}


class RecordError(ValueError):
    """A malformed or inconsistent line in an input file."""


class SchemaError(ValueError):
    """An input file whose header does not match the expected columns."""


@dataclass(frozen=True)
class CellRecord:
    cell: CellGraph
    hash: str
    trainable_parameters: int | None = None
    mean_validation_accuracy: float | None = None

    @classmethod
    def of(cls, cell: CellGraph, **meta) -> "CellRecord":
        return cls(cell, canonical_hash(cell), **meta)

    def to_json(self) -> dict:
        d = {"hash": self.hash, **self.cell.to_dict()}
        if self.trainable_parameters is not None:
            d["trainable_parameters"] = self.trainable_parameters
        if self.mean_validation_accuracy is not None:
            d["mean_validation_accuracy"] = self.mean_validation_accuracy
        return d


@dataclass(frozen=True)
class ParamDiscrepancy:
    hash: str
    stored: int
    computed: int


def open_text(path: str | os.PathLike, mode: str = "r") -> IO[str]:
    """Open plain or gzip text; ``-`` is not special."""
    path = Path(path)
    if path.suffix == ".gz":
        if "w" in mode:
            raw = gzip.GzipFile(filename="", mode="wb", fileobj=open(path, "wb"), mtime=0)
            # GzipFile does not close a passed fileobj; wrap so closing closes both.
            return _GzipText(raw)
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


class _GzipText(io.TextIOWrapper):
    def __init__(self, raw: gzip.GzipFile):
        super().__init__(raw, encoding="utf-8", newline="")
        self._fileobj = raw.fileobj

    def close(self):
        super().close()
        self._fileobj.close()


# -- cells ----------------------------------------------------------------------


def _parse_cell_line(text: str, where: str, verify: bool) -> CellRecord:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"{where}: invalid JSON ({exc.msg})") from None
    if not isinstance(d, dict) or "ops" not in d or "adjacency" not in d:
        raise RecordError(f"{where}: expected an object with 'ops' and 'adjacency'")
    try:
        cell = CellGraph.from_dict(d)
    except (ValueError, KeyError, TypeError) as exc:
        raise RecordError(f"{where}: {exc}") from None
    report = validate_cell(cell)
    if not report.ok:
        raise RecordError(f"{where}: invalid cell ({'; '.join(report.violations)})")
    h = canonical_hash(cell)
    stored = d.get("hash")
    if verify and stored is not None and stored != h:
        raise RecordError(f"{where}: hash mismatch for record {stored} (recomputed {h})")
    params = d.get("trainable_parameters")
    acc = d.get("mean_validation_accuracy")
    if params is not None and (not isinstance(params, int) or isinstance(params, bool)):
        raise RecordError(f"{where}: trainable_parameters must be an integer")
    if acc is not None and not isinstance(acc, (int, float)):
        raise RecordError(f"{where}: mean_validation_accuracy must be a number")
    return CellRecord(cell, h, params, None if acc is None else float(acc))


def read_cells(path: str | os.PathLike, *, verify: bool = True) -> Iterator[CellRecord]:
    """Yield records one line at a time. Blank lines are skipped."""
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                yield _parse_cell_line(line, f"{path}:{lineno}", verify)


def write_cells(path: str | os.PathLike, items: Iterable[CellGraph | CellRecord]) -> int:
    n = 0
    with open_text(path, "w") as fh:
        for item in items:
            rec = item if isinstance(item, CellRecord) else CellRecord.of(item)
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def param_discrepancies(records: Iterable[CellRecord], spec: NetworkSpec | None = None) -> Iterator[ParamDiscrepancy]:
    """Records whose stored parameter count differs from our own network expansion."""
    spec = spec or NetworkSpec()
    for rec in records:
        if rec.trainable_parameters is None:
            continue
        computed = expand_network(rec.cell, spec).total_params
        if computed != rec.trainable_parameters:
            yield ParamDiscrepancy(rec.hash, rec.trainable_parameters, computed)


# -- results --------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest string that round-trips exactly
    return str(value)


def write_results(path: str | os.PathLike, rows: Iterable[ResultRow]) -> int:
    n = 0
    with open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS + OPTIONAL_RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS + OPTIONAL_RESULT_COLUMNS])
            n += 1
    return n


def check_header(header: list[str] | None, where: str) -> None:
    if header is None:
        raise SchemaError(f"{where}: empty file, expected a header row")
    missing = [c for c in RESULT_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{where}: missing column(s) {', '.join(missing)}")


def read_results(path: str | os.PathLike) -> Iterator[ResultRow]:
    with open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        check_header(header, str(path))
        index = {name: i for i, name in enumerate(header)}
        acc_col = index.get("mean_validation_accuracy")
        for lineno, raw in enumerate(reader, 2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise RecordError(f"{path}:{lineno}: expected {len(header)} fields, got {len(raw)}")
            values = {}
            try:
                for c in RESULT_COLUMNS:
                    s = raw[index[c]]
                    values[c] = int(s) if c in _INT_COLUMNS else float(s) if c in _FLOAT_COLUMNS else s
                acc = raw[acc_col] if acc_col is not None else ""
                values["mean_validation_accuracy"] = float(acc) if acc else None
            except ValueError as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from None
            yield ResultRow(**values)


def write_metadata(path: str | os.PathLike, meta: dict) -> Path:
    """Write ``<path>.meta.json`` next to an output file and return its path."""
    out = Path(str(path) + ".meta.json")
    out.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out
