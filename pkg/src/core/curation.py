import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor

from pydantic import BaseModel, Field

from ..errors import ConfigError, OracleError
from ..models.corpus import QuestionRecord, SkipEntry
from ..transformers.to_prompt import PromptTransformer
from .oracles import RolloutOracle
from .rng import SeedStreams

logger = logging.getLogger(__name__)


class CurationResult(BaseModel):
    kept: list[QuestionRecord] = Field(default_factory=list)
    skipped: list[SkipEntry] = Field(default_factory=list)
    pass_count_histogram: dict[int, int] = Field(default_factory=dict)

    @property
    def dropped(self) -> int:
        return sum(self.pass_count_histogram.values()) - len(self.kept)


class Curator:
    """Filtro de dificultad: conserva los registros con pocos aciertos del oráculo"""

    def __init__(
            self,
            oracle: RolloutOracle,
            n_eval: int = 8,
            keep_counts: Iterable[int] = (0, 1),
            workers: int = 1,
    ):
        if n_eval < 1:
            raise ConfigError("n_eval must be at least 1")
        self.oracle = oracle
        self.n_eval = n_eval
        self.keep_counts = frozenset(keep_counts)
        self.workers = workers

    def count_passes(self, record: QuestionRecord, streams: SeedStreams) -> int:
        prompt = PromptTransformer.assemble_prompt(record.problem, "")
        return sum(
            self.oracle.evaluate(record, prompt, attempt, streams.seed_for(f"curate:{record.id}", attempt)).correct
            for attempt in range(self.n_eval)
        )

    def _safe_count(self, record: QuestionRecord, streams: SeedStreams) -> int | OracleError:
        try:
            return self.count_passes(record, streams)
        except OracleError as e:
            return e

    def curate(self, records: Sequence[QuestionRecord], streams: SeedStreams) -> CurationResult:
        """
        Rellena pass_count con n_eval llamadas al oráculo y conserva los
        registros cuyo conteo está en keep_counts, en el orden original.
        """
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(lambda record: self._safe_count(record, streams), records))
        else:
            outcomes = [self._safe_count(record, streams) for record in records]

        result = CurationResult()
        histogram: Counter[int] = Counter()
        for record, outcome in zip(records, outcomes):
            if isinstance(outcome, OracleError):
                logger.warning("oracle failed on record %s: %s", record.id, outcome)
                result.skipped.append(SkipEntry(stage="curate", record_id=record.id, reason=str(outcome)))
                continue
            histogram[outcome] += 1
            if outcome in self.keep_counts:
                result.kept.append(record.model_copy(update={"pass_count": outcome, "n_eval": self.n_eval}))

        result.pass_count_histogram = dict(sorted(histogram.items()))
        logger.info("curated %d records: kept %d, skipped %d", len(records), len(result.kept), len(result.skipped))
        return result
