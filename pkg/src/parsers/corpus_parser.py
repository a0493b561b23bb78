import json
from pathlib import Path

from pydantic import ValidationError

from ..errors import RecordError
from ..models.corpus import QuestionRecord
from .config_parser import ConfigParser


class CorpusParser:
    """
    Parser para corpus JSONL: un registro por línea.

    Se ignoran las líneas vacías y las que empiezan con `#` (cabecera de
    artefactos). Un registro mal formado detiene la lectura con el número
    de línea.
    """

    @staticmethod
    def parse(content: str) -> list[QuestionRecord]:
        records: list[QuestionRecord] = []
        seen: set[str] = set()
        for line_no, line in enumerate(content.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                data = json.loads(stripped)
            except json.JSONDecodeError as e:
                raise RecordError(f"invalid JSON: {e.msg}", line=line_no) from e
            if not isinstance(data, dict):
                raise RecordError("record must be a JSON object", line=line_no)

            record_id = data.get("id")
            try:
                record = QuestionRecord.model_validate(data)
            except ValidationError as e:
                fields = ", ".join(".".join(str(p) for p in item["loc"]) for item in e.errors())
                raise RecordError(f"invalid fields: {fields}", line=line_no, record_id=record_id) from e
            if record.id in seen:
                raise RecordError(f"duplicate record id {record.id}", line=line_no, record_id=record.id)
            seen.add(record.id)
            records.append(record)
        return records

    @staticmethod
    def parse_file(filepath: str | Path) -> list[QuestionRecord]:
        return CorpusParser.parse(ConfigParser.read_text(filepath))
