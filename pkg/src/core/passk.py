"""Estimadores de pass@k.

El estimador insesgado es 1 - C(n-c, k) / C(n, k), evaluado como producto
estable 1 - prod_{i=n-c+1}^{n} (1 - k / i) (misma forma que la evaluación
de HumanEval), sin factoriales.
"""

import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from fractions import Fraction
from typing import Literal

import numpy as np

from ..errors import ConfigError
from ..models.metrics import (
    EstimatorComparison,
    EstimatorStats,
    PassAtKReport,
    PassAtKRow,
    SampleTally,
    SolvedSetDiff,
)

logger = logging.getLogger(__name__)


def question_sort_key(question_id: str) -> tuple[int, int | str]:
    """Orden natural: ids numéricos primero y por valor"""
    return (0, int(question_id)) if question_id.isdigit() else (1, question_id)


class PassAtK:
    """Estimación de pass@k por pregunta y sobre un dataset"""

    @staticmethod
    def _check(n: int, c: int, k: int, strict: bool = False) -> None:
        if n < 1:
            raise ConfigError(f"sample count n must be at least 1, got {n}")
        if not 0 <= c <= n:
            raise ConfigError(f"correct count c={c} outside 0..{n}")
        if not 1 <= k <= n:
            raise ConfigError(f"k={k} outside 1..n={n}")
        if 2 * k > n:
            if strict:
                raise ConfigError(f"n={n} is below 2k={2 * k}")
            logger.debug("n=%d is below 2k=%d; estimate has higher variance", n, 2 * k)

    @staticmethod
    def unbiased(n: int, c: int, k: int, strict: bool = False) -> float:
        PassAtK._check(n, c, k, strict)
        if n - c < k:
            return 1.0
        return float(1.0 - np.prod(1.0 - k / np.arange(n - c + 1, n + 1)))

    @staticmethod
    def unbiased_exact(n: int, c: int, k: int) -> Fraction:
        """Mismo estimador en aritmética racional exacta"""
        PassAtK._check(n, c, k)
        if n - c < k:
            return Fraction(1)
        product = Fraction(1)
        for i in range(k):
            product *= Fraction(n - c - i, n - i)
        return 1 - product

    @staticmethod
    def naive(n: int, c: int, k: int, strict: bool = False) -> float:
        """Estimador plug-in 1 - (1 - c/n)^k"""
        PassAtK._check(n, c, k, strict)
        return float(1.0 - (1.0 - c / n) ** k)

    @staticmethod
    def report(
            tallies: Iterable[SampleTally],
            k: int,
            estimator: Literal["unbiased", "naive"] = "unbiased",
            strict: bool = False,
    ) -> PassAtKReport:
        """Estimación por pregunta; las filas con k > n se reportan y se saltan"""
        estimate = PassAtK.unbiased if estimator == "unbiased" else PassAtK.naive
        report = PassAtKReport(k=k, estimator=estimator)
        warned = False
        for tally in tallies:
            if k > tally.n:
                logger.warning("question %s: k=%d exceeds n=%d, skipped", tally.question_id, k, tally.n)
                report.skipped.append(tally.question_id)
                continue
            if 2 * k > tally.n and not strict and not warned:
                logger.warning("n=%d is below 2k=%d for some questions", tally.n, 2 * k)
                warned = True
            report.rows.append(PassAtKRow(
                question_id=tally.question_id,
                n=tally.n,
                c=tally.c,
                k=k,
                estimate=estimate(tally.n, tally.c, k, strict),
            ))
        return report

    @staticmethod
    def curve(tallies: Sequence[SampleTally], ks: Iterable[int], strict: bool = False) -> dict[int, float]:
        """Media del estimador insesgado para cada k"""
        return {k: PassAtK.report(tallies, k, "unbiased", strict).mean for k in ks}

    @staticmethod
    def histogram(tallies: Sequence[SampleTally]) -> list[int]:
        """Conteo de preguntas por número de aciertos c = 0..n"""
        sizes = {tally.n for tally in tallies}
        if len(sizes) > 1:
            raise ConfigError(f"tallies mix sample counts {sorted(sizes)}")
        if not tallies:
            return []
        n = sizes.pop()
        counts = Counter(tally.c for tally in tallies)
        return [counts.get(c, 0) for c in range(n + 1)]

    @staticmethod
    def unsolved_indices(tallies: Iterable[SampleTally], k: int) -> list[str]:
        """Preguntas con pass@k insesgado igual a 0, es decir c = 0"""
        unsolved = []
        for tally in tallies:
            if k > tally.n:
                raise ConfigError(f"k={k} exceeds n={tally.n} for question {tally.question_id}")
            if tally.c == 0:
                unsolved.append(tally.question_id)
        return sorted(unsolved, key=question_sort_key)

    @staticmethod
    def solved_set_diff(before: Sequence[SampleTally], after: Sequence[SampleTally], k: int) -> SolvedSetDiff:
        unsolved_before = set(PassAtK.unsolved_indices(before, k))
        unsolved_after = set(PassAtK.unsolved_indices(after, k))
        return SolvedSetDiff(
            newly_solved=sorted(unsolved_before - unsolved_after, key=question_sort_key),
            regressed=sorted(unsolved_after - unsolved_before, key=question_sort_key),
            still_unsolved=sorted(unsolved_before & unsolved_after, key=question_sort_key),
        )

    @staticmethod
    def estimator_comparison(
            true_p: float,
            n: int,
            k: int,
            trials: int,
            rng: np.random.Generator,
    ) -> EstimatorComparison:
        """
        Remuestrea c ~ Binomial(n, true_p) `trials` veces y mide media,
        sesgo, varianza y error cuadrático de ambos estimadores.
        """
        if not 0.0 <= true_p <= 1.0:
            raise ConfigError("true_p must lie in [0, 1]")
        PassAtK._check(n, 0, k)
        truth = 1.0 - (1.0 - true_p) ** k
        counts = rng.binomial(n, true_p, size=trials)

        # Tabla por c para no recalcular el producto en cada ensayo
        unbiased_table = np.array([PassAtK.unbiased(n, c, k) for c in range(n + 1)])
        naive_table = np.array([PassAtK.naive(n, c, k) for c in range(n + 1)])

        def stats(values: np.ndarray) -> EstimatorStats:
            return EstimatorStats(
                mean=float(values.mean()),
                bias=float(values.mean() - truth),
                variance=float(values.var()),
                mse=float(np.mean((values - truth) ** 2)),
            )

        return EstimatorComparison(
            true_p=true_p,
            n=n,
            k=k,
            trials=trials,
            true_pass_at_k=truth,
            unbiased=stats(unbiased_table[counts]),
            naive=stats(naive_table[counts]),
        )
