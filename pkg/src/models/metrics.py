from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SampleTally(BaseModel):
    """n muestras generadas para una pregunta, c de ellas correctas"""
    model_config = ConfigDict(frozen=True)

    question_id: str
    n: int = Field(ge=1)
    c: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_counts(self) -> "SampleTally":
        if self.c > self.n:
            raise ValueError(f"correct count {self.c} exceeds samples {self.n}")
        return self


class PassAtKRow(BaseModel):
    question_id: str
    n: int
    c: int
    k: int
    estimate: float = Field(ge=0.0, le=1.0)


class PassAtKReport(BaseModel):
    """Estimaciones pass@k por pregunta y su media sobre el dataset"""
    k: int = Field(ge=1)
    estimator: Literal["unbiased", "naive"]
    rows: list[PassAtKRow] = Field(default_factory=list)
    skipped: list[str] = Field(default_factory=list)

    @property
    def mean(self) -> float:
        if not self.rows:
            return 0.0
        return sum(row.estimate for row in self.rows) / len(self.rows)


class EstimatorStats(BaseModel):
    mean: float
    bias: float
    variance: float
    mse: float


class EstimatorComparison(BaseModel):
    """Sesgo y varianza de ambos estimadores frente al pass@k verdadero"""
    true_p: float
    n: int
    k: int
    trials: int
    true_pass_at_k: float
    unbiased: EstimatorStats
    naive: EstimatorStats


class SolvedSetDiff(BaseModel):
    """Diferencias entre dos conjuntos de preguntas sin resolver"""
    newly_solved: list[str]
    regressed: list[str]
    still_unsolved: list[str]
