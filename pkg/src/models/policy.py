import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator


class PolicyTable(BaseModel):
    """
    Política tabular con parametrización softmax.

    theta[s, q] es el logit de la acción s en la columna q. En entornos
    planos cada columna es una pregunta; en cadenas cada columna es un
    par (pregunta, paso).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta: np.ndarray
    seed: int | None = None

    @field_validator("theta", mode="before")
    @classmethod
    def _as_matrix(cls, value: Any) -> np.ndarray:
        # Siempre copiamos: una tabla nunca comparte memoria con quien la creó
        matrix = np.array(value, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValueError("theta must be a non-empty (actions x questions) matrix")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("theta entries must be finite")
        matrix.setflags(write=False)
        return matrix

    @field_serializer("theta")
    def _dump_theta(self, theta: np.ndarray) -> list[list[float]]:
        return theta.tolist()

    @property
    def num_actions(self) -> int:
        return int(self.theta.shape[0])

    @property
    def num_questions(self) -> int:
        """Número de columnas de theta"""
        return int(self.theta.shape[1])

    @classmethod
    def uniform(cls, num_actions: int, num_questions: int) -> "PolicyTable":
        return cls(theta=np.zeros((num_actions, num_questions)))

    def with_theta(self, theta: np.ndarray) -> "PolicyTable":
        """Devuelve una tabla nueva con otros logits (la actual no se toca)"""
        return PolicyTable(theta=theta, seed=self.seed)

    def with_column(self, q: int, column: np.ndarray) -> "PolicyTable":
        theta = self.theta.copy()
        theta[:, q] = column
        return self.with_theta(theta)


class BoundedLogitConfig(BaseModel):
    """Logits acotados por M a temperatura finita sobre un vocabulario |V|"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    logit_bound: float = Field(ge=0.0)
    temperature: float = Field(default=1.0, gt=0.0)
    vocab_size: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_floor(self) -> "BoundedLogitConfig":
        if not math.isfinite(self.log_token_floor):
            raise ValueError("per-token probability floor underflows to zero")
        return self

    @property
    def log_token_floor(self) -> float:
        """log c, con c = exp(-M/T) / (exp(M/T) * |V|)"""
        return -2.0 * self.logit_bound / self.temperature - math.log(self.vocab_size)

    @property
    def token_floor(self) -> float:
        return math.exp(self.log_token_floor)


class CapacitySetResult(BaseModel):
    """Conjunto de capacidad C(q, delta_p) de una distribución"""
    model_config = ConfigDict(frozen=True)

    member_actions: list[int]
    accumulated_mass: float = Field(ge=0.0, le=1.0 + 1e-9)
    delta_p: float = Field(gt=0.0, lt=1.0)

    def __contains__(self, action: int) -> bool:
        return action in self.member_actions

    def intersects(self, actions: set[int] | list[int]) -> bool:
        return not set(self.member_actions).isdisjoint(actions)
