import csv
from pathlib import Path

from pydantic import ValidationError

from ..errors import RecordError
from ..models.metrics import SampleTally
from .config_parser import ConfigParser

REQUIRED_COLUMNS = ("question_id", "n", "c")


class TallyParser:
    """Parser para conteos por pregunta en CSV (question_id, n, c)"""

    @staticmethod
    def parse(content: str) -> list[SampleTally]:
        lines = [
            (line_no, line)
            for line_no, line in enumerate(content.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
        if not lines:
            return []

        reader = csv.DictReader(line for _, line in lines)
        missing = [column for column in REQUIRED_COLUMNS if column not in (reader.fieldnames or [])]
        if missing:
            raise RecordError(f"missing columns {missing}", line=lines[0][0])

        tallies = []
        for (line_no, _), row in zip(lines[1:], reader):
            try:
                tallies.append(SampleTally(question_id=row["question_id"], n=int(row["n"]), c=int(row["c"])))
            except (TypeError, ValueError, ValidationError) as e:
                raise RecordError(f"invalid tally: {e}", line=line_no, record_id=row.get("question_id")) from e
        return tallies

    @staticmethod
    def parse_file(filepath: str | Path) -> list[SampleTally]:
        return TallyParser.parse(ConfigParser.read_text(filepath))
