import logging

import numpy as np
from scipy.special import log_softmax, softmax
from scipy.stats import entropy as shannon_entropy

from ..errors import ConfigError, QuestionIndexError
from ..models.environment import Environment
from ..models.metrics import SampleTally
from ..models.policy import BoundedLogitConfig, CapacitySetResult, PolicyTable
from ..models.training import TabularPrompt, Trajectory

logger = logging.getLogger(__name__)

# Por debajo de este valor una probabilidad se trata como 0 al muestrear
# (nunca al calcular log-probabilidades)
SAMPLING_FLOOR = 1e-300


class TabularModel:
    """
    Operaciones sobre la política tabular softmax.

    Todas son de solo lectura sobre la PolicyTable; las actualizaciones
    devuelven tablas nuevas.
    """

    @staticmethod
    def _check_column(policy: PolicyTable, q: int) -> None:
        if not 0 <= q < policy.num_questions:
            raise QuestionIndexError(f"question index {q} outside 0..{policy.num_questions - 1}")

    @staticmethod
    def _check_action(policy: PolicyTable, s: int) -> None:
        if not 0 <= s < policy.num_actions:
            raise QuestionIndexError(f"action index {s} outside 0..{policy.num_actions - 1}")

    @staticmethod
    def _masked_logits(
            policy: PolicyTable,
            q: int,
            allowed: np.ndarray | None = None,
            temperature: float = 1.0,
    ) -> np.ndarray:
        TabularModel._check_column(policy, q)
        logits = policy.theta[:, q] / temperature
        if allowed is None:
            return logits
        if not np.any(allowed):
            raise ConfigError("allowed action set is empty")
        return np.where(allowed, logits, -np.inf)

    @staticmethod
    def softmax_probs(policy: PolicyTable, q: int) -> np.ndarray:
        """mu_theta(.|q), con resta del máximo para evitar overflow"""
        return softmax(TabularModel._masked_logits(policy, q))

    @staticmethod
    def masked_softmax_probs(
            policy: PolicyTable,
            q: int,
            allowed: np.ndarray | None,
            temperature: float = 1.0,
    ) -> np.ndarray:
        """Softmax restringido a `allowed` (fuera del conjunto vale 0)"""
        return softmax(TabularModel._masked_logits(policy, q, allowed, temperature))

    @staticmethod
    def log_probs(
            policy: PolicyTable,
            q: int,
            allowed: np.ndarray | None = None,
            temperature: float = 1.0,
    ) -> np.ndarray:
        return log_softmax(TabularModel._masked_logits(policy, q, allowed, temperature))

    @staticmethod
    def entropy(policy: PolicyTable, q: int) -> float:
        return float(shannon_entropy(TabularModel.softmax_probs(policy, q)))

    @staticmethod
    def draw(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        probs = np.where(probs < SAMPLING_FLOOR, 0.0, probs)
        probs = probs / probs.sum()
        return rng.choice(probs.size, size=n, p=probs)

    @staticmethod
    def sample_actions(
            policy: PolicyTable,
            q: int,
            n: int,
            rng: np.random.Generator,
            allowed: np.ndarray | None = None,
            temperature: float = 1.0,
    ) -> list[int]:
        """n extracciones i.i.d. de mu_theta(.|q)"""
        if n < 1:
            raise ConfigError("sample count must be at least 1")
        probs = TabularModel.masked_softmax_probs(policy, q, allowed, temperature)
        return TabularModel.draw(probs, n, rng).tolist()

    @staticmethod
    def capacity_set(dist: np.ndarray | list[float], delta_p: float) -> CapacitySetResult:
        """
        Conjunto más pequeño de acciones con masa >= 1 - delta_p.

        Se toman las acciones en orden de probabilidad descendente; en
        empates va primero el índice menor.
        """
        if not 0.0 < delta_p < 1.0:
            raise ConfigError(f"delta_p must lie in (0, 1), got {delta_p}")
        probs = np.asarray(dist, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0):
            raise ConfigError("distribution must be a non-empty vector of non-negative reals")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError(f"distribution sums to {probs.sum()}, expected 1")

        order = np.argsort(-probs, kind="stable")
        cumulative = np.cumsum(probs[order])
        target = 1.0 - delta_p
        size = int(np.searchsorted(cumulative, target - 1e-12)) + 1
        size = min(size, probs.size)
        members = order[:size].tolist()
        return CapacitySetResult(
            member_actions=members,
            accumulated_mass=float(min(1.0, cumulative[size - 1])),
            delta_p=delta_p,
        )

    @staticmethod
    def log_prob_gradient(
            policy: PolicyTable,
            q: int,
            s: int,
            allowed: np.ndarray | None = None,
    ) -> np.ndarray:
        """grad_theta[:, q] log mu_theta(s|q) = e_s - mu_theta(.|q)"""
        TabularModel._check_action(policy, s)
        grad = -TabularModel.masked_softmax_probs(policy, q, allowed)
        grad[s] += 1.0
        return grad

    @staticmethod
    def positivity_floor(cfg: BoundedLogitConfig, sequence_length: int) -> float:
        """
        Log de la cota inferior c^n de la probabilidad de cualquier secuencia
        de longitud n bajo logits acotados.
        """
        if sequence_length < 1:
            raise ConfigError("sequence length must be at least 1")
        return sequence_length * cfg.log_token_floor

    @staticmethod
    def chain_rollout(
            env: Environment,
            step_probs: list[float],
            rng: np.random.Generator,
            q: int = 0,
    ) -> Trajectory:
        """
        Un rollout de la cadena: en cada paso el token correcto sale con
        probabilidad step_probs[t], si no sale uno incorrecto al azar.
        """
        probs = TabularModel._check_step_probs(env, step_probs)
        tokens: list[int] = []
        log_probs: list[float] = []
        success = True
        for t, p in enumerate(probs):
            correct = env.correct_mask(q, t)
            if rng.random() < p:
                tokens.append(int(np.flatnonzero(correct)[0]))
                log_probs.append(float(np.log(p)))
            else:
                wrong = np.flatnonzero(~correct)
                tokens.append(int(rng.choice(wrong)))
                log_probs.append(float(np.log1p(-p) - np.log(wrong.size)))
                success = False
        return Trajectory(tokens=tokens, success=success, log_probs=log_probs)

    @staticmethod
    def chain_successes(
            env: Environment,
            step_probs: list[float],
            n: int,
            rng: np.random.Generator,
    ) -> np.ndarray:
        """Versión vectorizada: n indicadores de éxito"""
        probs = TabularModel._check_step_probs(env, step_probs)
        return np.all(rng.random((n, probs.size)) < probs, axis=1)

    @staticmethod
    def _check_step_probs(env: Environment, step_probs: list[float]) -> np.ndarray:
        if env.kind != "chain":
            raise ConfigError("chain rollouts need a chain environment")
        probs = np.asarray(step_probs, dtype=np.float64)
        if probs.size == 0:
            raise ConfigError("empty chain")
        if probs.size != env.depth:
            raise ConfigError(f"expected {env.depth} step probabilities, got {probs.size}")
        if np.any(probs <= 0.0) or np.any(probs > 1.0):
            raise ConfigError("step probabilities must lie in (0, 1]")
        return probs

    @staticmethod
    def sample_trajectories(
            policy: PolicyTable,
            env: Environment,
            prompt: TabularPrompt,
            n: int,
            rng: np.random.Generator,
            temperature: float = 1.0,
    ) -> list[Trajectory]:
        """n trayectorias de la política para un prompt (pregunta + pista)"""
        q = prompt.question
        if not 0 <= q < env.num_questions:
            raise QuestionIndexError(f"question index {q} outside 0..{env.num_questions - 1}")
        start = env.hint_depth(prompt.p)
        allowed = env.allowed_actions(q, prompt.p)
        length = env.depth - start

        tokens = np.empty((n, length), dtype=np.int64)
        log_probs = np.empty((n, length))
        success = np.ones(n, dtype=bool)
        for j, t in enumerate(range(start, env.depth)):
            logp = TabularModel.log_probs(policy, env.column(q, t), allowed, temperature)
            draws = TabularModel.draw(np.exp(logp), n, rng)
            tokens[:, j] = draws
            log_probs[:, j] = logp[draws]
            success &= env.correct_mask(q, t)[draws]

        return [
            Trajectory(tokens=tokens[i].tolist(), start=start, success=bool(success[i]), log_probs=log_probs[i].tolist())
            for i in range(n)
        ]

    @staticmethod
    def evaluate_without_hint(
            policy: PolicyTable,
            env: Environment,
            n_samples: int,
            rng: np.random.Generator,
    ) -> list[SampleTally]:
        """Cuenta aciertos sin pista: n_samples trayectorias por pregunta"""
        tallies = []
        for q, child in enumerate(rng.spawn(env.num_questions)):
            trajectories = TabularModel.sample_trajectories(policy, env, TabularPrompt(question=q), n_samples, child)
            correct = sum(traj.success for traj in trajectories)
            tallies.append(SampleTally(question_id=str(q), n=n_samples, c=correct))
        logger.debug("evaluated %d questions with %d samples each", env.num_questions, n_samples)
        return tallies
