"""Table loading: CSV/JSON input, column-kind inference, sidecar overrides."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .errors import InputError
from .model import Column, ColumnKind, DataTable, Scalar

_ISO_DATE = re.compile(r"^\d{4}([-/]\d{1,2}([-/]\d{1,2})?)?$")
_MONTHS = {
    "jan", "feb", "mar", "apr", "may", "jun",
    "jul", "aug", "sep", "oct", "nov", "dec",
    "january", "february", "march", "april", "june", "july",
    "august", "september", "october", "november", "december",
}


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.replace(",", ""))
        except ValueError:
            return None
    return None


def _looks_temporal(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    return bool(_ISO_DATE.match(value.strip())) or value.strip().lower() in _MONTHS


def infer_column_kind(values: Sequence[Any]) -> ColumnKind:
    """All-numeric columns are quantitative, date/month-like ones temporal,
    anything else categorical.  Nulls are ignored."""
    present = [v for v in values if v is not None and v != ""]
    if not present:
        return ColumnKind.CATEGORICAL
    if all(_as_number(v) is not None for v in present):
        return ColumnKind.QUANTITATIVE
    if all(_looks_temporal(v) for v in present):
        return ColumnKind.TEMPORAL
    return ColumnKind.CATEGORICAL


def _load_sidecar(path: Path) -> tuple[Optional[str], dict[str, ColumnKind]]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read schema sidecar {path}: {exc}") from exc
    if not isinstance(data, Mapping):
        raise InputError(f"schema sidecar {path} must be a JSON object")
    name = data.get("name")
    raw_cols = data.get("columns", {k: v for k, v in data.items() if k != "name"})
    kinds: dict[str, ColumnKind] = {}
    for col, kind in raw_cols.items():
        try:
            kinds[col] = ColumnKind(str(kind).lower())
        except ValueError:
            raise InputError(
                f"schema sidecar {path}: invalid kind {kind!r} for column {col!r}"
            ) from None
    return name, kinds


def _read_csv(path: Path) -> tuple[list[str], list[dict[str, Any]]]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise InputError(f"{path}: empty CSV file")
            names = list(reader.fieldnames)
            records = []
            for row in reader:
                records.append({k: (None if row.get(k) in (None, "") else row[k]) for k in names})
    except OSError as exc:
        raise InputError(f"cannot read table {path}: {exc}") from exc
    return names, records


def _read_json(path: Path) -> tuple[list[str], list[dict[str, Any]]]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read table {path}: {exc}") from exc
    if not isinstance(data, list) or not all(isinstance(r, Mapping) for r in data):
        raise InputError(f"{path}: JSON table must be an array of flat records")
    names: dict[str, None] = {}
    for rec in data:
        for k in rec:
            names.setdefault(k, None)
    records = [{k: rec.get(k) for k in names} for rec in data]
    return list(names), records


def load_table(
    path: str | Path,
    schema_path: str | Path | None = None,
    name: Optional[str] = None,
) -> DataTable:
    """Load a table from CSV (header row) or a JSON array of records.

    Column kinds are inferred and can be overridden by a JSON sidecar of
    the form ``{"name": ..., "columns": {"Month": "temporal"}}``.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        names, records = _read_json(path)
    else:
        names, records = _read_csv(path)

    sidecar_name = None
    overrides: dict[str, ColumnKind] = {}
    if schema_path is not None:
        sidecar_name, overrides = _load_sidecar(Path(schema_path))
        unknown = [c for c in overrides if c not in names]
        if unknown:
            raise InputError(f"schema sidecar mentions unknown columns {unknown}")

    kinds = {
        col: overrides.get(col, infer_column_kind([r[col] for r in records]))
        for col in names
    }

    rows: list[dict[str, Scalar]] = []
    for i, rec in enumerate(records):
        row: dict[str, Scalar] = {}
        for col in names:
            v = rec[col]
            if v is None or v == "":
                row[col] = None
            elif kinds[col] is ColumnKind.QUANTITATIVE:
                num = _as_number(v)
                if num is None:
                    raise InputError(
                        f"{path}: row {i}, column {col!r}: {v!r} is not numeric"
                    )
                row[col] = num
            else:
                row[col] = str(v) if not isinstance(v, str) else v
        rows.append(row)

    table_name = name or sidecar_name or path.stem
    columns = tuple(Column(c, kinds[c]) for c in names)
    return DataTable(name=table_name, columns=columns, rows=tuple(rows))


def table_schema_text(table: DataTable, sample_rows: int = 3) -> str:
    """Compact human-readable schema used inside prompts."""
    lines = [f"Table: {table.name}"]
    for col in table.columns:
        sample = [str(r[col.name]) for r in table.rows[:sample_rows]]
        lines.append(f"- {col.name} ({col.kind.value}): e.g. {', '.join(sample)}")
    return "\n".join(lines)
