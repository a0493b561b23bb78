import math

import numpy as np
import pytest

from src.core.rng import SeedStreams
from src.core.theory import StatCheck, TheoryHarness
from src.errors import PreconditionError, TargetUnreachable
from src.models.policy import BoundedLogitConfig, PolicyTable
from src.models.theory import (
    BudgetExperiment,
    HintBudgetGrid,
    HintSpec,
    LowerBoundGrid,
    SqrtBudgetGrid,
    TheoryConfig,
    UpperBoundGrid,
)


def lower_bound(p_sol: float, delta_p: float, total: int, trials: int, seed: int = 0):
    env = TheoryHarness.stall_environment(4, 32, p_sol)
    experiment = BudgetExperiment(steps=total, batch=1, trials=trials, delta_p=delta_p)
    return TheoryHarness.verify_lower_bound(env, env.initial_policy(), experiment, np.random.default_rng(seed))


class TestStatCheck:

    def test_clopper_pearson_edges(self):
        assert StatCheck.clopper_pearson(0, 10)[0] == 0.0
        assert StatCheck.clopper_pearson(10, 10)[1] == 1.0

    def test_clopper_pearson_known_interval(self):
        lower, upper = StatCheck.clopper_pearson(5, 10)
        assert lower == pytest.approx(0.1871, abs=1e-3)
        assert upper == pytest.approx(0.8129, abs=1e-3)

    def test_at_least_pass_fail_inconclusive(self):
        assert StatCheck.at_least(0.5, 0.5, 10_000, 0.1)[1] == "pass"
        assert StatCheck.at_least(0.4, 0.5, 10_000, 0.1)[1] == "fail"
        assert StatCheck.at_least(0.4, 0.5, 10, 0.1)[1] == "inconclusive"


class TestLowerBound:

    def test_frequency_respects_bound(self):
        done, row = lower_bound(0.005, 0.01, 100, 10_000)
        assert row.bound == pytest.approx(0.99 ** 100)
        assert row.status == "pass"
        assert row.empirical >= row.bound - row.ci_halfwidth
        assert done.no_update_count == round(row.empirical * 10_000)
        assert done.solve_count == 10_000 - done.no_update_count

    def test_solution_outside_support_never_updates(self):
        _, row = lower_bound(0.0, 0.01, 100, 2_000)
        assert row.empirical == 1.0

    def test_single_sample(self):
        _, row = lower_bound(0.005, 0.01, 1, 10_000)
        assert row.empirical == pytest.approx(0.995, abs=0.005)
        assert row.status == "pass"

    def test_solution_inside_capacity_set_is_refused(self):
        with pytest.raises(PreconditionError):
            lower_bound(0.5, 0.01, 100, 100)

    def test_wide_interval_is_inconclusive(self):
        _, row = lower_bound(0.0005, 0.001, 1000, 100)
        assert row.status == "inconclusive"


class TestHintBudget:

    def test_hinted_environment_matches_delta(self):
        env, hints = TheoryHarness.hinted_environment(1, 64, 0.01)
        check = TheoryHarness.validate_hint(env, env.initial_policy(), hints[0], np.random.default_rng(3))
        assert check.hint_mass == pytest.approx(0.01)
        assert check.solution_given_hint == pytest.approx(0.01)

    def test_budget_finds_solution(self):
        env, hints = TheoryHarness.hinted_environment(1, 64, 0.01)
        experiment, row = TheoryHarness.verify_hint_budget(env, env.initial_policy(), hints[0], 1_000, np.random.default_rng(5))
        assert row.status == "pass"
        assert row.empirical >= 0.99 - row.ci_halfwidth
        assert experiment.solve_count == round(row.empirical * 1_000)
        assert experiment.solve_count + experiment.no_update_count == 1_000

    def test_trivial_hint(self):
        env, hints = TheoryHarness.hinted_environment(1, 64, 1.0)
        _, row = TheoryHarness.verify_hint_budget(env, env.initial_policy(), hints[0], 100, np.random.default_rng(5))
        assert row.empirical == 1.0

    def test_unit_budget_factor(self):
        env, hints = TheoryHarness.hinted_environment(1, 64, 0.01)
        _, row = TheoryHarness.verify_hint_budget(
            env, env.initial_policy(), hints[0], 2_000, np.random.default_rng(8), budget_factor=1.0
        )
        assert row.empirical == pytest.approx(1 - 0.99 ** 100, abs=0.05)

    def test_matching_delta_p_is_recorded(self):
        delta_prime = 0.01 ** 0.45
        env, hints = TheoryHarness.hinted_environment(1, 64, delta_prime)
        experiment, row = TheoryHarness.verify_hint_budget(
            env, env.initial_policy(), hints[0], 200, np.random.default_rng(6), delta_p=0.01
        )
        assert experiment.delta_p == 0.01
        assert row.note == "delta_p=0.01 matches delta_p'"

    def test_mismatched_delta_p_is_refused(self):
        env, hints = TheoryHarness.hinted_environment(1, 64, 0.01)
        with pytest.raises(PreconditionError, match="delta_p=0.02"):
            TheoryHarness.verify_hint_budget(env, env.initial_policy(), hints[0], 10, np.random.default_rng(0), delta_p=0.02)

    def test_without_delta_p_the_relation_is_implied(self):
        hint = HintSpec(question_id=0, hint_actions=[0], delta_p_prime=0.01 ** 0.45)
        delta_p, note = TheoryHarness.check_delta_relation(hint, None)
        assert delta_p == pytest.approx(0.01)
        assert note.startswith("implied delta_p=")

    def test_weak_hint_is_refused(self):
        env, _ = TheoryHarness.hinted_environment(1, 64, 0.01)
        greedy = HintSpec(question_id=0, hint_actions=[0, 1, 2, 3], delta_p_prime=0.2)
        with pytest.raises(PreconditionError):
            TheoryHarness.validate_hint(env, env.initial_policy(), greedy, np.random.default_rng(0))

    def test_chain_hint_depth(self):
        env = TheoryHarness.two_step_chain(0.3)
        hint = HintSpec(question_id=0, hint_depth=1, delta_p_prime=0.3)
        check = TheoryHarness.validate_hint(env, env.initial_policy(), hint, np.random.default_rng(1), samples=5_000)
        assert check.hint_mass == pytest.approx(0.3)
        assert check.solution_given_hint == pytest.approx(0.3)


class TestHintSpec:

    def test_exactly_one_kind(self):
        with pytest.raises(ValueError):
            HintSpec(question_id=0, hint_actions=[0], hint_depth=1, delta_p_prime=0.5)
        with pytest.raises(ValueError):
            HintSpec(question_id=0, delta_p_prime=0.5)

    def test_implied_delta_p(self):
        hint = HintSpec(question_id=0, hint_actions=[0], delta_p_prime=0.01 ** 0.45, epsilon=0.05)
        assert hint.implied_delta_p == pytest.approx(0.01)
        assert hint.matches_delta_p(0.01)
        assert not hint.matches_delta_p(0.02)


class TestSqrtBudget:

    def test_medians_at_one_tenth(self):
        report = TheoryHarness.sqrt_budget_experiment(0.1, 1_000, np.random.default_rng(11))
        assert report.analytic_unhinted_median == 69
        assert report.analytic_stage_median == 7
        assert report.unhinted_median == pytest.approx(69, abs=15)
        assert report.solve_stage_median == pytest.approx(7, abs=2)
        assert TheoryHarness.sqrt_budget_row(report).status == "pass"

    def test_certain_steps(self):
        report = TheoryHarness.sqrt_budget_experiment(1.0, 50, np.random.default_rng(0))
        assert report.unhinted_median == 1
        assert report.solve_stage_median == 1

    def test_speedup_grows_as_delta_shrinks(self):
        reports = [
            TheoryHarness.sqrt_budget_experiment(delta, 300, np.random.default_rng(i))
            for i, delta in enumerate([0.1, 0.05, 0.02])
        ]
        assert TheoryHarness.speedup_monotone_row(reports).status == "pass"

    def test_samples_to_first_success_counts_from_one(self):
        counts = TheoryHarness.samples_to_first_success(lambda m: np.ones(m, dtype=bool), 5, 4)
        assert counts.tolist() == [1] * 5


class TestOneStep:

    def test_uniform_policy_reaches_target(self):
        policy = PolicyTable.uniform(4, 1)
        result = TheoryHarness.one_step_pg_to_target(policy, 0, [0, 1, 2, 3, 0, 1, 2, 3], {0})
        assert result.found == [0]
        assert result.gradient[0] > 0
        assert np.all(result.gradient[1:] < 0)
        assert result.eta == 32.0
        assert result.mass >= 0.99

    def test_already_at_target(self):
        policy = PolicyTable(theta=np.array([[10.0], [0.0], [0.0], [0.0]]))
        result = TheoryHarness.one_step_pg_to_target(policy, 0, [0, 0, 0], {0})
        assert result.eta == 0.0
        assert result.policy is policy

    def test_no_solution_sampled(self):
        with pytest.raises(TargetUnreachable):
            TheoryHarness.one_step_pg_to_target(PolicyTable.uniform(4, 1), 0, [1, 2, 3], {0})


class TestUpperBound:

    def test_hinted_budget_suffices(self):
        env, hints = TheoryHarness.hinted_environment(10, 64, 0.05)
        outcome = TheoryHarness.verify_upper_bound(env, env.initial_policy(), hints, 200, np.random.default_rng(21))
        assert outcome.success_fraction >= 0.95
        assert outcome.sign_checks > 0

    def test_trivial_hints(self):
        env, hints = TheoryHarness.hinted_environment(3, 64, 1.0)
        outcome = TheoryHarness.verify_upper_bound(env, env.initial_policy(), hints, 10, np.random.default_rng(0))
        assert outcome.success_fraction == 1.0

    def test_unit_budget_factor_falls_short(self):
        env, hints = TheoryHarness.hinted_environment(10, 64, 0.05)
        outcome = TheoryHarness.verify_upper_bound(
            env, env.initial_policy(), hints, 200, np.random.default_rng(22), budget_factor=1.0
        )
        assert outcome.success_fraction < 0.9

    def test_mismatched_delta_p_is_refused(self):
        env, hints = TheoryHarness.hinted_environment(3, 64, 0.05)
        with pytest.raises(PreconditionError):
            TheoryHarness.verify_upper_bound(env, env.initial_policy(), hints, 5, np.random.default_rng(0), delta_p=0.5)

    def test_every_question_needs_a_hint(self):
        env, hints = TheoryHarness.hinted_environment(3, 64, 0.05)
        with pytest.raises(PreconditionError):
            TheoryHarness.verify_upper_bound(env, env.initial_policy(), hints[:2], 10, np.random.default_rng(0))


class TestAuxiliaryChecks:

    def test_conditioning(self):
        row = TheoryHarness.conditioning_consistency(0.3, 20_000, np.random.default_rng(4))
        assert row.status == "pass"
        assert row.bound == pytest.approx(0.09, abs=0.02)

    def test_positivity(self):
        row = TheoryHarness.positivity_check(BoundedLogitConfig(logit_bound=10.0, vocab_size=50_000))
        assert row.status == "pass"
        assert math.isfinite(row.empirical)


class TestRunGrid:

    @pytest.fixture
    def small_config(self) -> TheoryConfig:
        return TheoryConfig(
            trials=200,
            lower_bound=LowerBoundGrid(delta_p=[0.1], budget_multipliers=[1.0]),
            hint_budget=HintBudgetGrid(delta_p_prime=[0.05], trials=200),
            sqrt_budget=SqrtBudgetGrid(delta_p_prime=[0.1, 0.05], trials=200),
            upper_bound=UpperBoundGrid(num_questions=3, delta_p_prime=[0.05], trials=20),
            conditioning_trials=20_000,
        )

    def test_covers_every_experiment(self, small_config):
        rows = TheoryHarness.run_grid(small_config, SeedStreams(7))
        experiments = {row.experiment for row in rows}
        assert experiments == {
            "lower_bound", "hint_budget", "sqrt_budget", "sqrt_budget_monotone",
            "upper_bound", "conditioning", "positivity",
        }
        assert all(row.status in ("pass", "inconclusive") for row in rows)

    def test_reproducible(self, small_config):
        first = TheoryHarness.run_grid(small_config, SeedStreams(7))
        second = TheoryHarness.run_grid(small_config, SeedStreams(7))
        assert [row.empirical for row in first] == [row.empirical for row in second]

    def test_paired_delta_p(self, small_config):
        config = small_config.model_copy(update={
            "hint_budget": HintBudgetGrid(delta_p_prime=[0.05, 0.01 ** 0.45], delta_p=[0.5, 0.01], trials=200),
        })
        rows = [row for row in TheoryHarness.run_grid(config, SeedStreams(7)) if row.experiment == "hint_budget"]
        assert rows[0].status == "refused"
        assert rows[1].status != "refused"
        assert "matches" in rows[1].note

    def test_pairing_needs_equal_lengths(self):
        with pytest.raises(ValueError):
            HintBudgetGrid(delta_p_prime=[0.05, 0.01], delta_p=[0.5])

    def test_sqrt_budget_refusal_keeps_the_table(self, small_config, monkeypatch):
        real = TheoryHarness.sqrt_budget_experiment

        def flaky(delta_p_prime, trials, rng, *args):
            if delta_p_prime == 0.05:
                raise PreconditionError("two-step success rate off")
            return real(delta_p_prime, trials, rng, *args)

        monkeypatch.setattr(TheoryHarness, "sqrt_budget_experiment", staticmethod(flaky))
        rows = TheoryHarness.run_grid(small_config, SeedStreams(7))
        sqrt_rows = [row for row in rows if row.experiment.startswith("sqrt_budget")]
        assert [(row.grid_point, row.status) for row in sqrt_rows] == [
            ("delta_p'=0.1", "pass"),
            ("delta_p'=0.05", "refused"),
        ]
        assert {"upper_bound", "conditioning", "positivity"} <= {row.experiment for row in rows}

    def test_violated_precondition_becomes_refused_row(self, small_config):
        config = small_config.model_copy(update={
            "lower_bound": LowerBoundGrid(delta_p=[0.1], budget_multipliers=[1.0], solution_fraction=2.0),
        })
        rows = TheoryHarness.run_grid(config, SeedStreams(7))
        lower = [row for row in rows if row.experiment == "lower_bound"]
        assert [row.status for row in lower] == ["refused"]
