import json
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ValidationError

from ..errors import ConfigError
from ..models.environment import Environment
from ..models.policy import PolicyTable
from ..models.run import ProjectConfig

YAML_SUFFIXES = (".yaml", ".yml")


class ConfigParser:
    """Parser para archivos de configuración YAML o JSON"""

    @staticmethod
    def load_data(content: str, suffix: str = ".yaml") -> Any:
        """Decodifica el texto según la extensión"""
        try:
            if suffix.lower() in YAML_SUFFIXES:
                return yaml.safe_load(content)
            return json.loads(content)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot decode {suffix} content: {e}") from e

    @staticmethod
    def read_text(filepath: str | Path) -> str:
        # utf-8-sig para manejar BOM en Windows
        try:
            with open(filepath, "r", encoding="utf-8-sig") as f:
                return f.read()
        except OSError as e:
            raise ConfigError(f"cannot read {filepath}: {e}") from e

    @staticmethod
    def parse(content: str, suffix: str = ".yaml") -> ProjectConfig:
        data = ConfigParser.load_data(content, suffix) or {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        try:
            return ProjectConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError.from_validation(e) from e

    @staticmethod
    def parse_file(filepath: str | Path) -> ProjectConfig:
        path = Path(filepath)
        return ConfigParser.parse(ConfigParser.read_text(path), path.suffix)

    @staticmethod
    def parse_environment(content: str, suffix: str = ".yaml") -> Environment:
        """Un entorno suelto o la sección `environment` de un config completo"""
        data = ConfigParser.load_data(content, suffix)
        if isinstance(data, dict) and "environment" in data:
            data = data["environment"]
        try:
            return Environment.model_validate(data)
        except ValidationError as e:
            raise ConfigError.from_validation(e, "environment") from e

    @staticmethod
    def parse_environment_file(filepath: str | Path) -> Environment:
        path = Path(filepath)
        return ConfigParser.parse_environment(ConfigParser.read_text(path), path.suffix)

    @staticmethod
    def parse_policy(content: str) -> PolicyTable:
        """Política guardada como JSON con theta en listas anidadas"""
        try:
            return PolicyTable.model_validate(json.loads(content))
        except json.JSONDecodeError as e:
            raise ConfigError(f"policy file is not valid JSON: {e}") from e
        except ValidationError as e:
            raise ConfigError.from_validation(e, "policy") from e

    @staticmethod
    def parse_policy_file(filepath: str | Path) -> PolicyTable:
        return ConfigParser.parse_policy(ConfigParser.read_text(filepath))

    @staticmethod
    def dump(model: BaseModel, suffix: str = ".yaml") -> str:
        """Serializa en el orden canónico de campos del modelo"""
        data = model.model_dump(mode="json", exclude_none=True)
        if suffix.lower() in YAML_SUFFIXES:
            return yaml.safe_dump(data, sort_keys=False, allow_unicode=True, default_flow_style=False)
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"
