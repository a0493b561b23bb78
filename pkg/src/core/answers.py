"""Verificación de respuestas para la recompensa binaria.

La respuesta es el contenido del último \\boxed{...}; se compara por
igualdad exacta tras recortar y colapsar espacios.
"""

import re

from .grpo import GRPOTrainer

BOXED = "\\boxed{"
THINK_CLOSE = "</think>"
_WHITESPACE = re.compile(r"\s+")


class AnswerChecker:
    """Veredicto de corrección para completions con respuesta en \\boxed{}"""

    @staticmethod
    def extract_boxed(text: str) -> str | None:
        """Contenido del último \\boxed{...} con llaves balanceadas"""
        start = text.rfind(BOXED)
        if start < 0:
            return None
        depth = 1
        idx = start + len(BOXED)
        for pos in range(idx, len(text)):
            char = text[pos]
            if char == "{":
                depth += 1
            elif char == "}":
                depth -= 1
                if depth == 0:
                    return text[idx:pos]
        return None

    @staticmethod
    def normalize(answer: str) -> str:
        return _WHITESPACE.sub(" ", answer.strip())

    @staticmethod
    def answer_correct(completion: str, gold_answer: str) -> bool:
        answer = AnswerChecker.extract_boxed(completion)
        if answer is None:
            return False
        return AnswerChecker.normalize(answer) == AnswerChecker.normalize(gold_answer)

    @staticmethod
    def format_correct(completion: str) -> bool:
        """El formato exige un bloque de pensamiento cerrado"""
        return THINK_CLOSE in completion

    @staticmethod
    def score(completion: str, gold_answer: str) -> int:
        return GRPOTrainer.reward(
            AnswerChecker.answer_correct(completion, gold_answer),
            AnswerChecker.format_correct(completion),
        )
