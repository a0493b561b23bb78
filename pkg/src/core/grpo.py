import logging
from collections.abc import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import ConfigError, FilterViolation
from ..models.environment import Environment
from ..models.policy import PolicyTable
from ..models.training import FilterStats, RolloutGroup, StepReport, TabularPrompt, TrainerConfig
from .tabular import TabularModel

logger = logging.getLogger(__name__)


class TrainingRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    policy: PolicyTable
    reports: list[StepReport] = Field(default_factory=list)


class GRPOTrainer:
    """
    GRPO con muestreo dinámico de DAPO sobre una política tabular.

    Objetivo maximizado (sin término KL):
    J = media sobre grupos retenidos de
        (1/G) sum_i (1/|o_i|) sum_t min(r_it A_i, clip(r_it, 1-eps_low, 1+eps_high) A_i)
    con la restricción 0 < #correctas < G por grupo.
    """

    def __init__(self, env: Environment, config: TrainerConfig):
        self.env = env
        self.config = config

    @staticmethod
    def reward(answer_correct: bool, format_correct: bool) -> int:
        """1 si y solo si respuesta y formato son correctos"""
        return int(bool(answer_correct) and bool(format_correct))

    @staticmethod
    def normalize_advantages(rewards: Sequence[int]) -> list[float]:
        """(R_i - media) / desviación poblacional"""
        values = np.asarray(rewards, dtype=np.float64)
        std = values.std()
        if values.size == 0 or std == 0.0:
            raise FilterViolation("zero-variance rewards reached advantage normalization; apply dynamic_filter first")
        return ((values - values.mean()) / std).tolist()

    @staticmethod
    def dynamic_filter(groups: Sequence[RolloutGroup]) -> tuple[list[RolloutGroup], FilterStats]:
        """Retiene solo los grupos con 0 < sum R_i < G"""
        retained: list[RolloutGroup] = []
        stats = FilterStats()
        for group in groups:
            correct = group.num_correct
            if correct == group.group_size:
                stats.dropped_easy += 1
            elif correct == 0:
                stats.dropped_hard += 1
            else:
                retained.append(group)
        stats.retained = len(retained)
        return retained, stats

    @staticmethod
    def clipped_term(ratio: float, advantage: float, eps_low: float, eps_high: float) -> float:
        if ratio <= 0.0:
            raise ConfigError(f"importance ratio must be positive, got {ratio}")
        clipped = min(max(ratio, 1.0 - eps_low), 1.0 + eps_high)
        return min(ratio * advantage, clipped * advantage)

    @staticmethod
    def clipped_term_slope(ratio: np.ndarray, advantage: np.ndarray, eps_low: float, eps_high: float) -> np.ndarray:
        """Derivada del término recortado respecto del ratio (vectorizada)"""
        clipped = np.clip(ratio, 1.0 - eps_low, 1.0 + eps_high)
        unclipped_active = ratio * advantage <= clipped * advantage
        return np.where(unclipped_active, advantage, 0.0)

    def _group_terms(self, policy: PolicyTable, group: RolloutGroup):
        """Por cada paso generado: columna, tokens, ratios y ventajas del grupo"""
        env = self.env
        q = group.prompt.question
        allowed = env.allowed_actions(q, group.prompt.p)
        tokens = np.asarray(group.trajectories, dtype=np.int64)
        old = np.asarray(group.old_log_probs, dtype=np.float64)
        advantages = np.asarray(group.advantages, dtype=np.float64)
        for j in range(tokens.shape[1]):
            column = env.column(q, group.start + j)
            logp = TabularModel.log_probs(policy, column, allowed)
            ratio = np.exp(logp[tokens[:, j]] - old[:, j])
            yield column, allowed, tokens[:, j], ratio, advantages

    def surrogate(self, policy: PolicyTable, groups: Sequence[RolloutGroup]) -> float:
        """Valor del objetivo recortado para un lote congelado de grupos retenidos"""
        if not groups:
            return 0.0
        total = 0.0
        for group in groups:
            length = len(group.trajectories[0])
            for _, _, _, ratio, advantages in self._group_terms(policy, group):
                clipped = np.clip(ratio, 1.0 - self.config.eps_low, 1.0 + self.config.eps_high)
                terms = np.minimum(ratio * advantages, clipped * advantages)
                total += terms.sum() / (group.group_size * length)
        return total / len(groups)

    def surrogate_gradient(self, policy: PolicyTable, groups: Sequence[RolloutGroup]) -> np.ndarray:
        """Gradiente analítico de `surrogate` respecto de theta"""
        grad = np.zeros_like(policy.theta)
        if not groups:
            return grad
        for group in groups:
            length = len(group.trajectories[0])
            weight = 1.0 / (len(groups) * group.group_size * length)
            for column, allowed, tokens, ratio, advantages in self._group_terms(policy, group):
                slope = self.clipped_term_slope(ratio, advantages, self.config.eps_low, self.config.eps_high)
                # d ratio / d theta = ratio * (e_token - pi)
                coeff = weight * slope * ratio
                probs = TabularModel.masked_softmax_probs(policy, column, allowed)
                grad[:, column] += np.bincount(tokens, weights=coeff, minlength=policy.num_actions)
                grad[:, column] -= coeff.sum() * probs
        return grad

    def rollout(self, policy: PolicyTable, prompts: Sequence[TabularPrompt], rng: np.random.Generator) -> list[RolloutGroup]:
        """G trayectorias por prompt, cada prompt con su propio flujo aleatorio"""
        groups = []
        for prompt, child in zip(prompts, rng.spawn(len(prompts))):
            trajectories = TabularModel.sample_trajectories(policy, self.env, prompt, self.config.group_size, child)
            groups.append(RolloutGroup(
                prompt=prompt,
                trajectories=[traj.tokens for traj in trajectories],
                start=trajectories[0].start,
                # En el entorno tabular el formato siempre es correcto
                rewards=[self.reward(traj.success, True) for traj in trajectories],
                old_log_probs=[traj.log_probs for traj in trajectories],
            ))
        return groups

    def _mean_entropy(self, policy: PolicyTable, groups: Sequence[RolloutGroup]) -> float:
        if not groups:
            return 0.0
        values = [
            TabularModel.entropy(policy, self.env.column(group.prompt.question, t))
            for group in groups
            for t in range(group.start, self.env.depth)
        ]
        return float(np.mean(values))

    def train_step(
            self,
            policy: PolicyTable,
            prompts: Sequence[TabularPrompt],
            rng: np.random.Generator,
            step: int = 0,
    ) -> tuple[PolicyTable, StepReport]:
        """
        Un paso de GRPO: rollouts con pi_old, filtro dinámico, ventajas
        normalizadas y `updates_per_step` pasos de ascenso sobre theta.

        Si ningún grupo sobrevive al filtro la política se devuelve intacta.
        """
        if not prompts:
            raise ConfigError("training batch is empty")
        groups = self.rollout(policy, prompts, rng)
        retained, stats = self.dynamic_filter(groups)
        mean_reward = float(np.mean([r for group in groups for r in group.rewards]))

        if not retained:
            logger.debug("step %d: every group filtered (easy=%d, hard=%d)", step, stats.dropped_easy, stats.dropped_hard)
            return policy, StepReport(
                step=step,
                mean_reward=mean_reward,
                retained_groups=0,
                dropped_easy=stats.dropped_easy,
                dropped_hard=stats.dropped_hard,
                grad_norm=0.0,
                entropy=0.0,
                updated=False,
            )

        # Las ventajas se calculan después de filtrar
        retained = [
            group.model_copy(update={"advantages": self.normalize_advantages(group.rewards)})
            for group in retained
        ]
        entropy = self._mean_entropy(policy, retained)

        current = policy
        grad_norm = 0.0
        for update in range(self.config.updates_per_step):
            grad = self.surrogate_gradient(current, retained)
            if update == 0:
                grad_norm = float(np.linalg.norm(grad))
            current = current.with_theta(current.theta + self.config.learning_rate * grad)

        return current, StepReport(
            step=step,
            mean_reward=mean_reward,
            retained_groups=stats.retained,
            dropped_easy=stats.dropped_easy,
            dropped_hard=stats.dropped_hard,
            grad_norm=grad_norm,
            entropy=entropy,
            updated=True,
        )

    def prompts_for_step(
            self,
            step: int,
            total_steps: int,
            rng: np.random.Generator,
            questions: Sequence[int] | None = None,
    ) -> list[TabularPrompt]:
        """Lote del paso: preguntas x valores de p del programa de pistas"""
        questions = range(self.env.num_questions) if questions is None else questions
        p_values = self.config.hint_schedule.values_at(step, total_steps)
        prompts = [TabularPrompt(question=q, p=p) for q in questions for p in p_values]
        if len(prompts) > self.config.batch_size:
            chosen = np.sort(rng.choice(len(prompts), size=self.config.batch_size, replace=False))
            prompts = [prompts[i] for i in chosen]
        return prompts

    def train_loop(
            self,
            policy: PolicyTable,
            rng: np.random.Generator,
            steps: int | None = None,
            questions: Sequence[int] | None = None,
            on_step: Callable[[StepReport], None] | None = None,
    ) -> TrainingRun:
        total = self.config.steps if steps is None else steps
        if total < 0:
            raise ConfigError("step count must be non-negative")
        run = TrainingRun(policy=policy)
        for step, child in enumerate(rng.spawn(total)):
            batch_rng, rollout_rng = child.spawn(2)
            prompts = self.prompts_for_step(step, total, batch_rng, questions)
            run.policy, report = self.train_step(run.policy, prompts, rollout_rng, step=step)
            run.reports.append(report)
            if on_step is not None:
                on_step(report)
        return run
