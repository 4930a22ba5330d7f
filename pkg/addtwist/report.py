"""Tabular experiment reports with CSV and JSON persistence."""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

# integers beyond this are not exactly representable as JSON doubles
_JSON_EXACT = 2**53


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    return str(value)


def _json_cell(value: Any) -> Any:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and abs(value) >= _JSON_EXACT:
        return str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item"):
        return _json_cell(value.item())
    return value


@dataclass
class Report:
    """Rows of a computation together with the parameters that produced them."""

    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    created_at: datetime = field(default_factory=datetime.now)

    def add_row(self, row):
        """Append a row given as a sequence or as a mapping keyed by column."""
        if isinstance(row, dict):
            row = [row[col] for col in self.columns]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, report {self.name} has {len(self.columns)} columns")
        self.rows.append(list(row))

    def column(self, name: str) -> list[Any]:
        """All values of one column."""
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def set_metadata(self, key: str, value: Any):
        self.metadata[key] = value

    def get_metadata(self, key: str, default: Any = None) -> Any:
        return self.metadata.get(key, default)

    def __len__(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        """Convert the report to a JSON-ready dictionary."""
        return {
            "name": self.name,
            "created_at": self.created_at.isoformat(),
            "columns": self.columns,
            "rows": [[_json_cell(v) for v in row] for row in self.rows],
            "metadata": {k: _json_cell(v) for k, v in self.metadata.items()},
        }

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(_format_cell(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def save(self, filepath: str, fmt: Optional[str] = None):
        """Save the report as CSV or JSON, inferring the format from the suffix."""
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        fmt = fmt or ("json" if path.suffix == ".json" else "csv")

        with open(path, "w", encoding="utf-8", newline="") as f:
            if fmt == "json":
                json.dump(self.to_dict(), f, indent=2)
            elif fmt == "csv":
                f.write(self.to_csv())
            else:
                raise ValueError(f"unknown report format {fmt!r}")

    @classmethod
    def load(cls, filepath: str) -> "Report":
        """Load a report saved as JSON or CSV; CSV cells come back as floats where possible."""
        path = Path(filepath)
        with open(path, "r", encoding="utf-8", newline="") as f:
            if path.suffix == ".json":
                data = json.load(f)
                return cls(
                    name=data["name"],
                    columns=data["columns"],
                    rows=data.get("rows", []),
                    metadata=data.get("metadata", {}),
                    created_at=datetime.fromisoformat(data["created_at"]),
                )
            reader = csv.reader(f)
            columns = next(reader)
            rows = [[_parse_cell(cell) for cell in row] for row in reader]
        return cls(name=path.stem, columns=columns, rows=rows)


def _parse_cell(cell: str) -> Any:
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            pass
    return cell
