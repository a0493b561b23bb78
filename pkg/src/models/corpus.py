import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


def prefix_length(p: float, total: int) -> int:
    """Cantidad de unidades reveladas: floor(p * total)"""
    # La holgura absorbe errores de redondeo como 0.29 * 100 = 28.999...
    return min(total, max(0, math.floor(p * total + 1e-9)))


class QuestionRecord(BaseModel):
    """Entrada del corpus: problema, salida cruda del modelo y respuesta"""
    model_config = ConfigDict(extra="ignore")

    id: str
    problem: str
    raw_output: str = ""
    solution: str = ""
    gold_answer: str = ""
    pass_count: int | None = Field(default=None, ge=0)
    n_eval: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_counts(self) -> "QuestionRecord":
        if self.pass_count is not None and self.n_eval is not None and self.pass_count > self.n_eval:
            raise ValueError(f"pass_count {self.pass_count} exceeds n_eval {self.n_eval}")
        return self


class AugmentedPrompt(BaseModel):
    """Prompt aumentado: problema + pista parcial + instrucción final"""
    model_config = ConfigDict(frozen=True)

    source_id: str
    p: float = Field(ge=0.0, le=1.0)
    problem: str
    hint: str
    rendered: str


class SkipEntry(BaseModel):
    """Registro descartado por alguna etapa del pipeline"""
    stage: str
    record_id: str | None = None
    line: int | None = None
    reason: str


class PSchedule(BaseModel):
    """
    Programa de ratios p a lo largo del entrenamiento.

    constant: un único p en todos los pasos
    mixture: todos los p de la lista en cada paso
    linear_decay: p va de p_start a p_end linealmente
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "mixture", "linear_decay"] = "constant"
    values: list[float] = Field(default_factory=lambda: [0.5])
    p_start: float = Field(default=0.5, ge=0.0, le=1.0)
    p_end: float = Field(default=0.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_values(self) -> "PSchedule":
        if not self.values:
            raise ValueError("schedule needs at least one p value")
        if any(not 0.0 <= p <= 1.0 for p in self.values):
            raise ValueError("every p must lie in [0, 1]")
        return self

    def values_at(self, step: int, total_steps: int) -> list[float]:
        if self.kind == "constant":
            return [self.values[0]]
        if self.kind == "mixture":
            return list(self.values)
        if total_steps <= 1:
            return [self.p_start]
        frac = min(1.0, max(0.0, step / (total_steps - 1)))
        return [self.p_start + (self.p_end - self.p_start) * frac]
