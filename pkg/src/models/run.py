from datetime import datetime
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .environment import Environment
from .theory import TheoryConfig
from .training import TrainerConfig


class OracleConfig(BaseModel):
    """
    Oráculo de rollouts para la curación.

    scripted: `pass_counts` fija cuántas de las n_eval llamadas aciertan
    tabular: una política tabular sobre `environment` responde; el id de
    registro se asigna a la pregunta por orden de aparición
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["scripted", "tabular"] = "scripted"
    pass_counts: dict[str, int] = Field(default_factory=dict)
    failing_ids: list[str] = Field(default_factory=list)
    temperature: float = Field(default=1.0, gt=0.0)


class CurateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input: Path | None = None
    n_eval: int = Field(default=8, ge=1)
    keep_counts: list[int] = Field(default_factory=lambda: [0, 1])
    workers: int = Field(default=1, ge=1)
    oracle: OracleConfig = Field(default_factory=OracleConfig)


class AugmentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input: Path | None = None
    p_values: list[float] = Field(default_factory=lambda: [0.5])


class EvaluationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_eval: int = Field(default=8, ge=1)


class PassKSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tallies: Path | None = None
    compare: Path | None = None
    k_values: list[int] = Field(default_factory=lambda: [1])
    strict: bool = False


class ProjectConfig(BaseModel):
    """Archivo de configuración compartido: una sección por subcomando"""
    model_config = ConfigDict(extra="forbid")

    seed: int | None = Field(default=None, ge=0, lt=2**64)
    environment: Environment | None = None
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    theory: TheoryConfig = Field(default_factory=TheoryConfig)
    curate: CurateSection = Field(default_factory=CurateSection)
    augment: AugmentSection = Field(default_factory=AugmentSection)
    passk: PassKSection = Field(default_factory=PassKSection)


class RunConfig(BaseModel):
    """Configuración efectiva de una ejecución (archivo + flags)"""
    command: str
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: Path
    force: bool = False
    project: ProjectConfig = Field(default_factory=ProjectConfig)
    overrides: dict[str, Any] = Field(default_factory=dict)


class ArtifactEntry(BaseModel):
    name: str
    path: str
    sha256: str


class RunManifest(BaseModel):
    """Manifiesto de una ejecución: configuración, versión, tiempos y digests"""
    config: dict[str, Any]
    tool_version: str
    started_at: datetime
    finished_at: datetime | None = None
    artifacts: list[ArtifactEntry] = Field(default_factory=list)
