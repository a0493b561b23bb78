import logging
from collections.abc import Iterable, Sequence

from pydantic import BaseModel, Field

from ..errors import ConfigError, EmptySolutionError
from ..models.corpus import AugmentedPrompt, QuestionRecord, SkipEntry, prefix_length

logger = logging.getLogger(__name__)


class AugmentResult(BaseModel):
    prompts: list[AugmentedPrompt] = Field(default_factory=list)
    skipped: list[SkipEntry] = Field(default_factory=list)


class PromptTransformer:
    """
    Transforma registros del corpus en prompts aumentados con una solución
    parcial.

    Formato del prompt:
    {problema}

    ## Hint: Partial Solution
    {pista}

    Please reason step by step, and put your final answer within \\boxed{}.
    """

    THINK_CLOSE = "</think>"
    HINT_HEADER = "## Hint: Partial Solution"
    INSTRUCTION = "Please reason step by step, and put your final answer within \\boxed{}."

    @staticmethod
    def extract_solution(raw_output: str) -> str:
        """Texto tras el último </think>, sin espacios en los bordes"""
        marker = PromptTransformer.THINK_CLOSE
        idx = raw_output.rfind(marker)
        solution = raw_output[idx + len(marker):] if idx >= 0 else raw_output
        solution = solution.strip()
        if not solution:
            raise EmptySolutionError("solution block is empty after extraction")
        return solution

    @staticmethod
    def truncate_prefix(solution: str, p: float) -> str:
        """Primeros floor(p * N) tokens separados por espacios en blanco"""
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"partial ratio p must lie in [0, 1], got {p}")
        tokens = solution.split()
        return " ".join(tokens[:prefix_length(p, len(tokens))])

    @staticmethod
    def assemble_prompt(problem: str, hint: str) -> str:
        if not hint:
            # Sin pista no queda un encabezado colgando
            return f"{problem}\n\n{PromptTransformer.INSTRUCTION}"
        return f"{problem}\n\n{PromptTransformer.HINT_HEADER}\n{hint}\n\n{PromptTransformer.INSTRUCTION}"

    @staticmethod
    def parse_prompt(rendered: str) -> tuple[str, str]:
        """Inversa de assemble_prompt: devuelve (problema, pista)"""
        footer = f"\n\n{PromptTransformer.INSTRUCTION}"
        if not rendered.endswith(footer):
            raise ConfigError("rendered prompt lacks the instruction footer")
        body = rendered[:-len(footer)]
        header = f"\n\n{PromptTransformer.HINT_HEADER}\n"
        idx = body.find(header)
        if idx < 0:
            return body, ""
        return body[:idx], body[idx + len(header):]

    @staticmethod
    def build(record: QuestionRecord, p: float) -> AugmentedPrompt:
        solution = record.solution or PromptTransformer.extract_solution(record.raw_output)
        hint = PromptTransformer.truncate_prefix(solution, p)
        return AugmentedPrompt(
            source_id=record.id,
            p=p,
            problem=record.problem,
            hint=hint,
            rendered=PromptTransformer.assemble_prompt(record.problem, hint),
        )

    @staticmethod
    def augment_dataset(records: Iterable[QuestionRecord], p: float | Sequence[float] = 0.5) -> AugmentResult:
        """Un prompt por registro y por valor de p (producto cruzado, registro primero)"""
        p_values = [p] if isinstance(p, (int, float)) else list(p)
        if not p_values:
            raise ConfigError("at least one p value is required")
        for value in p_values:
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"partial ratio p must lie in [0, 1], got {value}")

        result = AugmentResult()
        for record in records:
            try:
                prompts = [PromptTransformer.build(record, value) for value in p_values]
            except EmptySolutionError as e:
                logger.warning("skipping record %s: %s", record.id, e)
                result.skipped.append(SkipEntry(stage="augment", record_id=record.id, reason="missing solution"))
                continue
            result.prompts.extend(prompts)
        return result
