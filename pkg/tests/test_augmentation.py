import numpy as np
import pytest

from src.core.answers import AnswerChecker
from src.core.curation import Curator
from src.core.oracles import ScriptedOracle, TabularPolicyOracle
from src.core.rng import SeedStreams
from src.errors import ConfigError, EmptySolutionError
from src.models.corpus import PSchedule, QuestionRecord
from src.models.environment import Environment, QuestionSpec
from src.transformers.to_prompt import PromptTransformer

PROBLEM = (
    "Let $a$ and $b$ be positive real numbers with $a + b = 1$. "
    "Find the minimum value of $\\frac{1}{a} + \\frac{4}{b}$."
)
SOLUTION = (
    "By Cauchy-Schwarz, $(a + b)\\left(\\frac{1}{a} + \\frac{4}{b}\\right) \\ge (1 + 2)^2 = 9$, "
    "with equality at $a = 1/3$, $b = 2/3$. The minimum is \\boxed{9}."
)


def record(rid: str, solution: str = "one two three four", **extra) -> QuestionRecord:
    return QuestionRecord(id=rid, problem=f"Problem {rid}", solution=solution, gold_answer="42", **extra)


class TestExtractSolution:

    def test_text_after_marker(self):
        assert PromptTransformer.extract_solution("<think>foo</think>The answer is 7.") == "The answer is 7."

    def test_no_marker_keeps_everything(self):
        assert PromptTransformer.extract_solution("  no markers here ") == "no markers here"

    def test_last_marker_wins(self):
        assert PromptTransformer.extract_solution("<think>a</think>mid<think>b</think>final") == "final"

    def test_empty_solution(self):
        with pytest.raises(EmptySolutionError):
            PromptTransformer.extract_solution("<think>only thoughts</think>   ")


class TestTruncatePrefix:

    def test_half_of_ten_tokens(self):
        solution = " ".join(f"t{i}" for i in range(10))
        assert PromptTransformer.truncate_prefix(solution, 0.5) == "t0 t1 t2 t3 t4"

    def test_full_ratio_normalizes_whitespace(self):
        assert PromptTransformer.truncate_prefix("a  b\n c\td", 1.0) == "a b c d"

    def test_floor_rounding(self):
        hint = PromptTransformer.truncate_prefix("one two three four five six seven", 0.5)
        assert hint == "one two three"
        assert len(hint.split()) == 3

    def test_zero_ratio(self):
        assert PromptTransformer.truncate_prefix(SOLUTION, 0.0) == ""

    def test_ratio_out_of_range(self):
        with pytest.raises(ConfigError):
            PromptTransformer.truncate_prefix("a b", 1.5)

    def test_prefix_monotonicity(self):
        tokens = SOLUTION.split()
        previous = []
        for p in np.linspace(0.0, 1.0, 21):
            current = PromptTransformer.truncate_prefix(SOLUTION, float(p)).split()
            assert current[:len(previous)] == previous
            assert current == tokens[:len(current)]
            previous = current


class TestAssemblePrompt:

    def test_layout(self):
        expected = (
            "P\n\n## Hint: Partial Solution\nH\n\n"
            "Please reason step by step, and put your final answer within \\boxed{}."
        )
        assert PromptTransformer.assemble_prompt("P", "H") == expected

    def test_empty_hint_drops_header(self):
        expected = "P\n\nPlease reason step by step, and put your final answer within \\boxed{}."
        assert PromptTransformer.assemble_prompt("P", "") == expected

    def test_matches_golden_file(self, fixtures_dir):
        hint = PromptTransformer.truncate_prefix(SOLUTION, 0.5)
        golden = (fixtures_dir / "prompt_box.txt").read_text(encoding="utf-8")
        assert PromptTransformer.assemble_prompt(PROBLEM, hint) == golden

    @pytest.mark.parametrize("problem,hint", [
        ("P", "H"),
        ("P", ""),
        ("multi\nline problem", "hint with\n\nblank line"),
        (PROBLEM, SOLUTION),
    ])
    def test_parse_recovers_parts(self, problem, hint):
        assert PromptTransformer.parse_prompt(PromptTransformer.assemble_prompt(problem, hint)) == (problem, hint)

    def test_parse_rejects_foreign_text(self):
        with pytest.raises(ConfigError):
            PromptTransformer.parse_prompt("just some text")


class TestAugmentDataset:

    def test_one_prompt_per_record(self):
        records = [record(str(i), " ".join(["w"] * 10)) for i in range(3)]
        result = PromptTransformer.augment_dataset(records, 0.5)
        assert len(result.prompts) == 3
        assert all(prompt.hint == "w w w w w" for prompt in result.prompts)

    def test_cross_product_is_record_major(self):
        result = PromptTransformer.augment_dataset([record("a"), record("b")], [0.25, 0.5])
        assert [(prompt.source_id, prompt.p) for prompt in result.prompts] == [
            ("a", 0.25), ("a", 0.5), ("b", 0.25), ("b", 0.5),
        ]

    def test_zero_ratio_is_plain_template(self):
        prompt = PromptTransformer.augment_dataset([record("a")], 0.0).prompts[0]
        assert prompt.rendered == PromptTransformer.assemble_prompt("Problem a", "")

    def test_missing_solution_is_skipped(self):
        broken = QuestionRecord(id="x", problem="P", raw_output="<think>t</think>")
        result = PromptTransformer.augment_dataset([record("a"), broken], 0.5)
        assert [prompt.source_id for prompt in result.prompts] == ["a"]
        assert result.skipped[0].record_id == "x"
        assert result.skipped[0].stage == "augment"

    def test_solution_extracted_from_raw_output(self):
        raw = QuestionRecord(id="r", problem="P", raw_output="<think>x</think>alpha beta")
        assert PromptTransformer.augment_dataset([raw], 1.0).prompts[0].hint == "alpha beta"

    def test_full_ratio_hint_is_solution(self):
        prompt = PromptTransformer.augment_dataset([record("a", SOLUTION)], 1.0).prompts[0]
        assert prompt.hint == " ".join(SOLUTION.split())

    def test_empty_p_list(self):
        with pytest.raises(ConfigError):
            PromptTransformer.augment_dataset([record("a")], [])


class TestAnswerChecker:

    def test_balanced_braces(self):
        assert AnswerChecker.extract_boxed("so \\boxed{\\frac{1}{2}} done") == "\\frac{1}{2}"

    def test_last_box_wins(self):
        assert AnswerChecker.extract_boxed("\\boxed{1} then \\boxed{2}") == "2"

    def test_unclosed_box(self):
        assert AnswerChecker.extract_boxed("\\boxed{1") is None

    def test_whitespace_normalized(self):
        assert AnswerChecker.answer_correct("<think>.</think>\\boxed{ 2,   3 }", "2, 3")

    def test_score_needs_format(self):
        assert AnswerChecker.score("<think>.</think>\\boxed{5}", "5") == 1
        assert AnswerChecker.score("\\boxed{5}", "5") == 0
        assert AnswerChecker.score("<think>.</think>\\boxed{4}", "5") == 0


class TestCurate:

    def test_always_wrong_keeps_everything(self):
        records = [record(str(i)) for i in range(5)]
        result = Curator(ScriptedOracle({}, default=0)).curate(records, SeedStreams(1))
        assert [r.id for r in result.kept] == [r.id for r in records]
        assert all(r.pass_count == 0 and r.n_eval == 8 for r in result.kept)

    def test_always_right_keeps_nothing(self):
        records = [record(str(i)) for i in range(5)]
        result = Curator(ScriptedOracle({}, default=8)).curate(records, SeedStreams(1))
        assert result.kept == []
        assert result.pass_count_histogram == {8: 5}

    def test_scripted_counts(self):
        counts = {"a": 0, "b": 1, "c": 2, "d": 8}
        records = [record(rid) for rid in counts]
        result = Curator(ScriptedOracle(counts)).curate(records, SeedStreams(1))
        assert [r.id for r in result.kept] == ["a", "b"]
        assert [r.pass_count for r in result.kept] == [0, 1]
        assert result.dropped == 2

    def test_stricter_keep_is_subset(self):
        counts = {str(i): i % 3 for i in range(30)}
        records = [record(rid) for rid in counts]
        default = Curator(ScriptedOracle(counts)).curate(records, SeedStreams(1))
        strict = Curator(ScriptedOracle(counts), keep_counts={0}).curate(records, SeedStreams(1))
        assert {r.id for r in strict.kept} < {r.id for r in default.kept}

    def test_oracle_failure_goes_to_skip_report(self):
        records = [record("a"), record("b")]
        result = Curator(ScriptedOracle({}, failing_ids={"b"})).curate(records, SeedStreams(1))
        assert [r.id for r in result.kept] == ["a"]
        assert result.skipped[0].record_id == "b"

    def test_workers_preserve_order(self):
        counts = {f"r{i}": i % 2 for i in range(40)}
        records = [record(rid) for rid in counts]
        serial = Curator(ScriptedOracle(counts)).curate(records, SeedStreams(1))
        threaded = Curator(ScriptedOracle(counts), workers=4).curate(records, SeedStreams(1))
        assert [r.id for r in threaded.kept] == [r.id for r in serial.kept]

    def test_invalid_n_eval(self):
        with pytest.raises(ConfigError):
            Curator(ScriptedOracle({}), n_eval=0)


class TestTabularOracle:

    def make_oracle(self, solution_logit: float) -> TabularPolicyOracle:
        env = Environment(kind="flat", num_actions=4, questions=[
            QuestionSpec(solution=[0], solution_logit=solution_logit),
        ])
        return TabularPolicyOracle(env, env.initial_policy(), {"a": 0})

    def test_deterministic_given_seed(self):
        oracle = self.make_oracle(0.0)
        first = oracle.evaluate(record("a"), "prompt", 0, seed=17)
        second = oracle.evaluate(record("a"), "prompt", 0, seed=17)
        assert first == second

    def test_certain_policy_is_always_correct(self):
        oracle = self.make_oracle(60.0)
        verdict = oracle.evaluate(record("a"), "prompt", 0, seed=3)
        assert verdict.correct
        assert AnswerChecker.extract_boxed(verdict.completion) == "42"

    def test_curation_with_tabular_oracle_is_reproducible(self):
        oracle = self.make_oracle(-1.0)
        first = Curator(oracle).curate([record("a")], SeedStreams(5))
        second = Curator(oracle).curate([record("a")], SeedStreams(5))
        assert first.pass_count_histogram == second.pass_count_histogram

    def test_unknown_record(self):
        from src.errors import OracleError

        with pytest.raises(OracleError):
            self.make_oracle(0.0).evaluate(record("zzz"), "prompt", 0, seed=1)

    def chain_oracle(self) -> TabularPolicyOracle:
        env = Environment(kind="chain", num_actions=4, depth=2, questions=[QuestionSpec(steps=[[0], [0]])])
        return TabularPolicyOracle(env, env.initial_policy(), {"a": 0})

    def test_hint_ratio(self):
        rec = record("a")
        assert TabularPolicyOracle.hint_ratio(rec, PromptTransformer.assemble_prompt("P", "one two")) == 0.5
        assert TabularPolicyOracle.hint_ratio(rec, PromptTransformer.assemble_prompt("P", "")) == 0.0
        assert TabularPolicyOracle.hint_ratio(rec, "free text") == 0.0

    def test_hinted_prompt_raises_pass_rate(self):
        oracle = self.chain_oracle()
        rec = record("a")
        plain = PromptTransformer.assemble_prompt(rec.problem, "")
        hinted = PromptTransformer.assemble_prompt(rec.problem, "one two")
        plain_hits = sum(oracle.evaluate(rec, plain, 0, seed).correct for seed in range(400))
        hinted_hits = sum(oracle.evaluate(rec, hinted, 0, seed).correct for seed in range(400))
        # 0.25^2 sin pista frente a 0.25 con un paso revelado
        assert hinted_hits > plain_hits + 30

    def test_hinted_completion_includes_revealed_prefix(self):
        oracle = self.chain_oracle()
        hinted = PromptTransformer.assemble_prompt("P", "one two")
        verdict = oracle.evaluate(record("a"), hinted, 0, seed=5)
        thought = verdict.completion.split("</think>")[0].removeprefix("<think>")
        assert thought.split()[0] == "0"
        assert len(thought.split()) == 2

    def test_hinted_prompt_needs_solution(self):
        from src.errors import OracleError

        oracle = self.chain_oracle()
        bare = QuestionRecord(id="a", problem="P", gold_answer="42")
        with pytest.raises(OracleError):
            oracle.evaluate(bare, PromptTransformer.assemble_prompt("P", "one"), 0, seed=1)


class TestPSchedule:

    def test_constant(self):
        assert PSchedule(values=[0.3]).values_at(5, 10) == [0.3]

    def test_mixture(self):
        assert PSchedule(kind="mixture", values=[0.5, 0.0]).values_at(0, 10) == [0.5, 0.0]

    def test_linear_decay_endpoints(self):
        schedule = PSchedule(kind="linear_decay", p_start=0.5, p_end=0.0)
        assert schedule.values_at(0, 11) == [0.5]
        assert schedule.values_at(10, 11) == [pytest.approx(0.0)]
        assert schedule.values_at(5, 11) == [pytest.approx(0.25)]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PSchedule(values=[1.2])
