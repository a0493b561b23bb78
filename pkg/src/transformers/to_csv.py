import csv
import io
import math
from collections.abc import Iterable, Sequence
from typing import Any

from pydantic import BaseModel

from .to_jsonl import artifact_header


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


class CSVTransformer:
    """Escribe tablas CSV listas para graficar, con cabecera de semilla"""

    @staticmethod
    def to_csv(
            columns: Sequence[str],
            rows: Iterable[Sequence[Any] | BaseModel],
            seed: int,
            artifact: str,
    ) -> str:
        buffer = io.StringIO()
        buffer.write(artifact_header(seed, artifact) + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if isinstance(row, BaseModel):
                data = row.model_dump()
                row = [data[column] for column in columns]
            writer.writerow([_cell(value) for value in row])
        return buffer.getvalue()

    @staticmethod
    def read_rows(content: str) -> tuple[list[str], list[list[str]]]:
        """Columnas y filas de un CSV producido por `to_csv`"""
        lines = [line for line in content.splitlines() if line.strip() and not line.startswith("#")]
        if not lines:
            return [], []
        reader = csv.reader(lines)
        header = next(reader)
        return header, list(reader)
