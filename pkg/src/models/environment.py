import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .corpus import prefix_length
from .policy import PolicyTable


class QuestionSpec(BaseModel):
    """
    Una pregunta del entorno de juguete.

    Plano: `solution` es el conjunto S(q) de acciones correctas y `hint`
    el conjunto de acciones h_q que actúa como pista.
    Cadena: `steps[t]` es el conjunto de tokens correctos del paso t.
    `solution_logit` es el logit inicial de las acciones/tokens correctos
    (el resto arranca en 0).
    """
    model_config = ConfigDict(extra="forbid")

    solution: list[int] = Field(default_factory=list)
    steps: list[list[int]] = Field(default_factory=list)
    hint: list[int] | None = None
    solution_logit: float = 0.0
    hint_logit: float = 0.0


class Environment(BaseModel):
    """Entorno tabular: bandido plano o cadena de k pasos"""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["flat", "chain"] = "flat"
    num_actions: int = Field(ge=1)
    depth: int = Field(default=1, ge=1)
    questions: list[QuestionSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_questions(self) -> "Environment":
        if self.kind == "flat" and self.depth != 1:
            raise ValueError("flat environments have depth 1")
        if self.kind == "chain" and self.num_actions < 2:
            raise ValueError("chain branching must be at least 2")

        for idx, spec in enumerate(self.questions):
            if self.kind == "flat":
                if not spec.solution:
                    raise ValueError(f"question {idx}: empty solution set")
                self._check_actions(idx, spec.solution)
                if spec.hint is not None:
                    if not spec.hint:
                        raise ValueError(f"question {idx}: empty hint set")
                    self._check_actions(idx, spec.hint)
            else:
                if len(spec.steps) != self.depth:
                    raise ValueError(f"question {idx}: expected {self.depth} steps, got {len(spec.steps)}")
                for tokens in spec.steps:
                    if not tokens:
                        raise ValueError(f"question {idx}: empty correct-token set")
                    self._check_actions(idx, tokens)
        return self

    def _check_actions(self, idx: int, actions: list[int]) -> None:
        bad = [a for a in actions if not 0 <= a < self.num_actions]
        if bad:
            raise ValueError(f"question {idx}: actions {bad} outside 0..{self.num_actions - 1}")

    @property
    def num_questions(self) -> int:
        return len(self.questions)

    @property
    def num_columns(self) -> int:
        return self.num_questions * self.depth

    def column(self, q: int, t: int = 0) -> int:
        """Columna de theta para la pregunta q en el paso t"""
        return q * self.depth + t

    def correct_mask(self, q: int, t: int = 0) -> np.ndarray:
        spec = self.questions[q]
        tokens = spec.solution if self.kind == "flat" else spec.steps[t]
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[tokens] = True
        return mask

    def solution_set(self, q: int) -> set[int]:
        """S(q) en el caso plano"""
        return set(self.questions[q].solution)

    def hint_mask(self, q: int) -> np.ndarray | None:
        hint = self.questions[q].hint
        if hint is None:
            return None
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[hint] = True
        return mask

    def hint_depth(self, p: float) -> int:
        """
        Pasos revelados como pista para un ratio p.

        Siempre queda al menos un paso por generar.
        """
        if self.kind == "flat":
            return 0
        return min(prefix_length(p, self.depth), self.depth - 1)

    def allowed_actions(self, q: int, p: float) -> np.ndarray | None:
        """En el caso plano, p > 0 condiciona la política al conjunto pista"""
        if self.kind == "flat" and p > 0.0:
            return self.hint_mask(q)
        return None

    def hint_tokens(self, q: int, depth: int) -> list[int]:
        """Prefijo correcto de la cadena usado como pista"""
        return [min(self.questions[q].steps[t]) for t in range(depth)]

    def initial_policy(self) -> PolicyTable:
        theta = np.zeros((self.num_actions, self.num_columns))
        for q, spec in enumerate(self.questions):
            if self.kind == "flat":
                if spec.hint is not None:
                    theta[spec.hint, q] = spec.hint_logit
                theta[spec.solution, q] = spec.solution_logit
            else:
                for t, tokens in enumerate(spec.steps):
                    theta[tokens, self.column(q, t)] = spec.solution_logit
        return PolicyTable(theta=theta)

    @staticmethod
    def logit_for_probability(prob: float, num_correct: int, num_other: int) -> float:
        """Logit común de num_correct acciones para que sumen prob frente a num_other logits en 0"""
        if not 0.0 < prob < 1.0:
            raise ValueError("probability must lie in (0, 1)")
        return math.log(prob * num_other / ((1.0 - prob) * num_correct))
