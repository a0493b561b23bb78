import json
from collections.abc import Iterable
from typing import Any

from pydantic import BaseModel

from .. import __version__

TOOL_NAME = "questa-lab"


def artifact_header(seed: int, artifact: str) -> str:
    """Línea de comentario con versión, semilla raíz y nombre del artefacto"""
    return f"# {TOOL_NAME} {__version__} seed={seed} artifact={artifact}"


class JSONLTransformer:
    """Escribe registros como JSON por línea"""

    @staticmethod
    def to_line(item: BaseModel | dict[str, Any]) -> str:
        data = item.model_dump(mode="json") if isinstance(item, BaseModel) else item
        return json.dumps(data, ensure_ascii=False)

    @staticmethod
    def to_jsonl(items: Iterable[BaseModel | dict[str, Any]], seed: int, artifact: str) -> str:
        lines = [artifact_header(seed, artifact)]
        lines.extend(JSONLTransformer.to_line(item) for item in items)
        return "\n".join(lines) + "\n"
