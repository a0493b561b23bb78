import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class HintSpec(BaseModel):
    """
    Pista h_q para una pregunta.

    En el caso plano es un conjunto de acciones; en la cadena es la
    profundidad del prefijo revelado. delta_p_prime = delta_p^(1/2 - epsilon).
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    question_id: int = Field(ge=0)
    hint_actions: list[int] | None = None
    hint_depth: int | None = Field(default=None, ge=1)
    delta_p_prime: float = Field(gt=0.0, le=1.0)
    epsilon: float = Field(default=0.05, gt=0.0, lt=0.5)

    @model_validator(mode="after")
    def _one_kind(self) -> "HintSpec":
        if (self.hint_actions is None) == (self.hint_depth is None):
            raise ValueError("give exactly one of hint_actions or hint_depth")
        if self.hint_actions is not None and not self.hint_actions:
            raise ValueError("hint_actions must be non-empty")
        return self

    @property
    def implied_delta_p(self) -> float:
        """delta_p tal que delta_p' = delta_p^(1/2 - epsilon)"""
        return self.delta_p_prime ** (1.0 / (0.5 - self.epsilon))

    def matches_delta_p(self, delta_p: float, rel_tol: float = 1e-9) -> bool:
        return math.isclose(delta_p ** (0.5 - self.epsilon), self.delta_p_prime, rel_tol=rel_tol)


class BudgetExperiment(BaseModel):
    """T pasos con B muestras por paso, repetido `trials` veces"""
    steps: int = Field(ge=1)
    batch: int = Field(ge=1)
    trials: int = Field(ge=1)
    delta_p: float = Field(gt=0.0, le=1.0)
    no_update_count: int = 0
    solve_count: int = 0

    @property
    def total_samples(self) -> int:
        return self.steps * self.batch


RowStatus = Literal["pass", "fail", "inconclusive", "refused"]


class ExperimentRow(BaseModel):
    """Fila de la tabla de verificación teórica"""
    experiment: str
    grid_point: str
    empirical: float
    bound: float
    ci_halfwidth: float
    status: RowStatus
    note: str = ""


class LowerBoundGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    delta_p: list[float] = Field(default_factory=lambda: [0.1, 0.01])
    budget_multipliers: list[float] = Field(default_factory=lambda: [1.0, 2.0])
    solution_fraction: float = Field(default=0.5, gt=0.0)
    num_questions: int = Field(default=4, ge=1)
    num_actions: int = Field(default=16, ge=2)


class PairedDeltaGrid(BaseModel):
    """delta_p opcional, emparejado posición a posición con delta_p_prime"""
    model_config = ConfigDict(extra="forbid")

    delta_p_prime: list[float] = Field(default_factory=lambda: [0.05])
    delta_p: list[float] | None = None

    @model_validator(mode="after")
    def _paired(self) -> "PairedDeltaGrid":
        if self.delta_p is not None and len(self.delta_p) != len(self.delta_p_prime):
            raise ValueError("delta_p and delta_p_prime must have the same length")
        return self

    def pairs(self) -> list[tuple[float, float | None]]:
        paired = self.delta_p or [None] * len(self.delta_p_prime)
        return list(zip(self.delta_p_prime, paired))


class HintBudgetGrid(PairedDeltaGrid):
    delta_p_prime: list[float] = Field(default_factory=lambda: [0.01])
    budget_factor: float = Field(default=10.0, gt=0.0)
    trials: int | None = Field(default=1000, ge=1)
    hint_size: int = Field(default=4, ge=1)
    num_actions: int = Field(default=64, ge=2)


class SqrtBudgetGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    delta_p_prime: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.02])
    trials: int | None = Field(default=1000, ge=1)
    required_speedup: float = Field(default=5.0, gt=1.0)


class UpperBoundGrid(PairedDeltaGrid):
    num_questions: int = Field(default=10, ge=1)
    budget_factor: float = Field(default=10.0, gt=0.0)
    trials: int | None = Field(default=200, ge=1)
    hint_size: int = Field(default=4, ge=1)
    num_actions: int = Field(default=64, ge=2)
    target_mass: float = Field(default=0.99, gt=0.0, lt=1.0)


class TheoryConfig(BaseModel):
    """Grilla de experimentos de verificación"""
    model_config = ConfigDict(extra="forbid")

    trials: int = Field(default=10_000, ge=1)
    epsilon: float = Field(default=0.05, gt=0.0, lt=0.5)
    max_ci_halfwidth: float = Field(default=0.1, gt=0.0)
    lower_bound: LowerBoundGrid = Field(default_factory=LowerBoundGrid)
    hint_budget: HintBudgetGrid = Field(default_factory=HintBudgetGrid)
    sqrt_budget: SqrtBudgetGrid = Field(default_factory=SqrtBudgetGrid)
    upper_bound: UpperBoundGrid = Field(default_factory=UpperBoundGrid)
    conditioning_delta: float = Field(default=0.3, gt=0.0, lt=1.0)
    conditioning_trials: int = Field(default=50_000, ge=1)
