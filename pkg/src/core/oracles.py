import logging
from typing import Protocol

import numpy as np
from pydantic import BaseModel

from ..errors import ConfigError, EmptySolutionError, OracleError
from ..models.corpus import QuestionRecord
from ..models.environment import Environment
from ..models.policy import PolicyTable
from ..models.training import TabularPrompt
from ..transformers.to_prompt import PromptTransformer
from .answers import AnswerChecker
from .tabular import TabularModel

logger = logging.getLogger(__name__)


class OracleVerdict(BaseModel):
    completion: str
    correct: bool


class RolloutOracle(Protocol):
    """Dado un prompt devuelve una completion y su veredicto; determinista en (prompt, seed)"""

    def evaluate(self, record: QuestionRecord, prompt: str, attempt: int, seed: int) -> OracleVerdict:
        ...


class ScriptedOracle:
    """
    Oráculo de tabla: el registro `id` acierta en sus primeros
    pass_counts[id] intentos y falla en el resto.
    """

    def __init__(self, pass_counts: dict[str, int], failing_ids: set[str] | None = None, default: int = 0):
        self.pass_counts = dict(pass_counts)
        self.failing_ids = set(failing_ids or ())
        self.default = default

    def evaluate(self, record: QuestionRecord, prompt: str, attempt: int, seed: int) -> OracleVerdict:
        if record.id in self.failing_ids:
            raise OracleError(f"scripted failure for record {record.id}")
        correct = attempt < self.pass_counts.get(record.id, self.default)
        answer = record.gold_answer if correct else f"not {record.gold_answer}"
        return OracleVerdict(completion=f"<think>scripted</think>\\boxed{{{answer}}}", correct=correct)


class TabularPolicyOracle:
    """
    Oráculo respaldado por una política tabular: cada registro se asigna a
    una pregunta del entorno; si la trayectoria muestreada resuelve la
    pregunta la completion encierra la respuesta de referencia.

    Un prompt con pista se traduce en el ratio p = tokens de la pista /
    tokens de la solución, así la cadena arranca tras el prefijo revelado.
    """

    def __init__(
            self,
            env: Environment,
            policy: PolicyTable,
            question_of: dict[str, int],
            temperature: float = 1.0,
    ):
        self.env = env
        self.policy = policy
        self.question_of = dict(question_of)
        self.temperature = temperature

    @staticmethod
    def hint_ratio(record: QuestionRecord, prompt: str) -> float:
        """Ratio p implícito en el prompt; 0 si no trae pista"""
        try:
            _, hint = PromptTransformer.parse_prompt(prompt)
        except ConfigError:
            logger.debug("prompt for record %s is not an assembled prompt, scoring without hint", record.id)
            return 0.0
        hinted = len(hint.split())
        if not hinted:
            return 0.0
        try:
            solution = (record.solution or PromptTransformer.extract_solution(record.raw_output)).split()
        except EmptySolutionError:
            solution = []
        if not solution:
            raise OracleError(f"record {record.id} has a hinted prompt but no solution")
        return min(1.0, hinted / len(solution))

    def evaluate(self, record: QuestionRecord, prompt: str, attempt: int, seed: int) -> OracleVerdict:
        q = self.question_of.get(record.id)
        if q is None or not 0 <= q < self.env.num_questions:
            raise OracleError(f"record {record.id} has no question in the environment")
        tabular_prompt = TabularPrompt(question=q, p=self.hint_ratio(record, prompt))
        rng = np.random.default_rng(seed)
        trajectory = TabularModel.sample_trajectories(
            self.policy, self.env, tabular_prompt, 1, rng, self.temperature
        )[0]
        revealed = self.env.hint_tokens(q, trajectory.start)
        thought = " ".join(str(token) for token in revealed + trajectory.tokens)
        answer = record.gold_answer if trajectory.success else f"wrong {thought}"
        completion = f"<think>{thought}</think>The answer is \\boxed{{{answer}}}."
        correct = AnswerChecker.score(completion, record.gold_answer) == 1
        return OracleVerdict(completion=completion, correct=correct)
