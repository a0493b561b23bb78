from pydantic import BaseModel, ConfigDict, Field, model_validator

from .corpus import PSchedule


class TabularPrompt(BaseModel):
    """Prompt del entorno tabular: una pregunta y el ratio p de su pista"""
    model_config = ConfigDict(frozen=True)

    question: int = Field(ge=0)
    p: float = Field(default=0.0, ge=0.0, le=1.0)

    @property
    def prompt_id(self) -> str:
        return f"q{self.question}@p{self.p:g}"


class Trajectory(BaseModel):
    """Trayectoria muestreada: tokens generados a partir del paso `start`"""
    tokens: list[int]
    start: int = 0
    success: bool
    log_probs: list[float]


class RolloutGroup(BaseModel):
    """G trayectorias de un mismo prompt con sus recompensas binarias"""
    prompt: TabularPrompt
    trajectories: list[list[int]]
    start: int = 0
    rewards: list[int]
    old_log_probs: list[list[float]]
    advantages: list[float] | None = None

    @model_validator(mode="after")
    def _check_lengths(self) -> "RolloutGroup":
        size = len(self.trajectories)
        if size < 2:
            raise ValueError("a rollout group needs at least 2 trajectories")
        if len(self.rewards) != size or len(self.old_log_probs) != size:
            raise ValueError("trajectories, rewards and old_log_probs must share length G")
        if self.advantages is not None and len(self.advantages) != size:
            raise ValueError("advantages must have length G")
        if any(r not in (0, 1) for r in self.rewards):
            raise ValueError("rewards are binary")
        return self

    @property
    def prompt_id(self) -> str:
        return self.prompt.prompt_id

    @property
    def group_size(self) -> int:
        return len(self.trajectories)

    @property
    def num_correct(self) -> int:
        return sum(self.rewards)


class TrainerConfig(BaseModel):
    """Hiperparámetros de GRPO con muestreo dinámico de DAPO (sin término KL)"""
    model_config = ConfigDict(extra="forbid")

    group_size: int = Field(default=16, ge=2)
    batch_size: int = Field(default=128, ge=1)
    eps_low: float = Field(default=0.2, gt=0.0)
    eps_high: float = Field(default=0.2, gt=0.0)
    learning_rate: float = Field(default=0.5, gt=0.0)
    steps: int = Field(default=750, ge=0)
    updates_per_step: int = Field(default=1, ge=1)
    hint_schedule: PSchedule = Field(default_factory=PSchedule)


class FilterStats(BaseModel):
    retained: int = 0
    dropped_easy: int = 0
    dropped_hard: int = 0


class StepReport(BaseModel):
    """Fila del reporte por paso de entrenamiento"""
    step: int
    mean_reward: float
    retained_groups: int
    dropped_easy: int
    dropped_hard: int
    grad_norm: float
    entropy: float
    updated: bool

    @classmethod
    def csv_columns(cls) -> list[str]:
        return list(cls.model_fields)
