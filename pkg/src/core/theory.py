"""Verificación Monte Carlo de las cotas de aprendibilidad.

Cada experimento devuelve una ExperimentRow con el valor empírico, la cota
analítica, la semi-amplitud 3*sqrt(v/trials) y un estado:
pass / fail / inconclusive (intervalo demasiado ancho) / refused
(precondición violada).
"""

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import beta

from ..errors import InvariantViolation, PreconditionError, TargetUnreachable
from ..models.environment import Environment, QuestionSpec
from ..models.policy import BoundedLogitConfig, PolicyTable
from ..models.theory import BudgetExperiment, ExperimentRow, HintSpec, RowStatus, TheoryConfig
from ..models.training import TabularPrompt
from .rng import SeedStreams
from .tabular import TabularModel

logger = logging.getLogger(__name__)


class HintCheck(BaseModel):
    """Probabilidades analíticas y estimadas de una pista"""
    hint_mass: float
    solution_given_hint: float
    hint_mass_ci: tuple[float, float]
    solution_given_hint_ci: tuple[float, float]


class SqrtBudgetReport(BaseModel):
    delta_p_prime: float
    unhinted_median: float
    hint_stage_median: float
    solve_stage_median: float
    hinted_total_median: float
    analytic_unhinted_median: int
    analytic_stage_median: int

    @property
    def speedup(self) -> float:
        return self.unhinted_median / self.solve_stage_median


class OneStepResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    policy: PolicyTable
    eta: float
    mass: float
    gradient: np.ndarray
    found: list[int]


class UpperBoundOutcome(BaseModel):
    success_fraction: float
    sign_checks: int
    row: ExperimentRow


class StatCheck:
    """Chequeos estadísticos de cotas inferiores"""

    @staticmethod
    def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
        alpha = 1.0 - confidence
        lower = 0.0 if successes == 0 else float(beta.ppf(alpha / 2, successes, trials - successes + 1))
        upper = 1.0 if successes == trials else float(beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
        return lower, upper

    @staticmethod
    def halfwidth(bound: float, trials: int) -> float:
        return 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)

    @staticmethod
    def at_least(empirical: float, bound: float, trials: int, max_halfwidth: float) -> tuple[float, RowStatus]:
        """pass si empirical >= bound - 3 * sqrt(v / trials)"""
        half = StatCheck.halfwidth(bound, trials)
        if half > max_halfwidth:
            return half, "inconclusive"
        return half, "pass" if empirical >= bound - half else "fail"


class TheoryHarness:
    """Experimentos de verificación sobre entornos tabulares de juguete"""

    # Entornos de prueba

    @staticmethod
    def stall_environment(num_questions: int, num_actions: int, p_sol: float) -> Environment:
        """
        Bandido plano donde la acción 0 es la única solución y tiene
        probabilidad p_sol; las demás se reparten el resto por igual.
        """
        if p_sol <= 0.0:
            # exp(-1000) es 0 en float64: la solución queda fuera del soporte
            logit = -1000.0
        else:
            logit = Environment.logit_for_probability(p_sol, 1, num_actions - 1)
        spec = QuestionSpec(solution=[0], solution_logit=logit)
        return Environment(kind="flat", num_actions=num_actions, questions=[spec] * num_questions)

    @staticmethod
    def hinted_environment(
            num_questions: int,
            num_actions: int,
            delta_p_prime: float,
            hint_size: int = 4,
            epsilon: float = 0.05,
    ) -> tuple[Environment, list[HintSpec]]:
        """
        Bandido plano con pista: h_q = {0..hint_size-1} tiene masa delta_p'
        y dentro de la pista la solución 0 tiene probabilidad delta_p'.
        """
        if delta_p_prime >= 1.0:
            env = Environment(kind="flat", num_actions=1, questions=[QuestionSpec(solution=[0], hint=[0])] * num_questions)
            hints = [HintSpec(question_id=q, hint_actions=[0], delta_p_prime=1.0, epsilon=epsilon) for q in range(num_questions)]
            return env, hints
        if not 2 <= hint_size < num_actions:
            raise PreconditionError("hint size must be at least 2 and smaller than the action count")

        hint_weight = delta_p_prime * (num_actions - hint_size) / (1.0 - delta_p_prime)
        solution_weight = delta_p_prime * hint_weight
        other_weight = (1.0 - delta_p_prime) * hint_weight / (hint_size - 1)
        spec = QuestionSpec(
            solution=[0],
            hint=list(range(hint_size)),
            solution_logit=math.log(solution_weight),
            hint_logit=math.log(other_weight),
        )
        env = Environment(kind="flat", num_actions=num_actions, questions=[spec] * num_questions)
        hints = [
            HintSpec(question_id=q, hint_actions=list(range(hint_size)), delta_p_prime=delta_p_prime, epsilon=epsilon)
            for q in range(num_questions)
        ]
        return env, hints

    @staticmethod
    def two_step_chain(delta_p_prime: float, branching: int = 4, num_questions: int = 1) -> Environment:
        """Cadena de dos pasos con probabilidad delta_p' de acertar cada paso"""
        if delta_p_prime >= 1.0:
            logit = 1000.0
        else:
            logit = Environment.logit_for_probability(delta_p_prime, 1, branching - 1)
        spec = QuestionSpec(steps=[[0], [0]], solution_logit=logit)
        return Environment(kind="chain", num_actions=branching, depth=2, questions=[spec] * num_questions)

    # Cota inferior

    @staticmethod
    def solution_probabilities(env: Environment, policy: PolicyTable) -> np.ndarray:
        return np.array([
            TabularModel.softmax_probs(policy, q)[env.correct_mask(q)].sum()
            for q in range(env.num_questions)
        ])

    @staticmethod
    def check_stall_precondition(env: Environment, policy: PolicyTable, delta_p: float) -> None:
        """C(q, delta_p) no debe intersecar S(q) para ninguna pregunta"""
        for q in range(env.num_questions):
            capacity = TabularModel.capacity_set(TabularModel.softmax_probs(policy, q), delta_p)
            if capacity.intersects(env.solution_set(q)):
                raise PreconditionError(
                    f"capacity set of question {q} at delta_p={delta_p} intersects its solution set"
                )

    @staticmethod
    def verify_lower_bound(
            env: Environment,
            policy: PolicyTable,
            experiment: BudgetExperiment,
            rng: np.random.Generator,
            max_halfwidth: float = 0.1,
    ) -> tuple[BudgetExperiment, ExperimentRow]:
        """
        Frecuencia de ejecuciones sin ninguna actualización: con la hipótesis
        de gradiente nulo, una ejecución de N = T*B muestras no actualiza si
        ninguna muestra cae en S(q).
        """
        delta_p = experiment.delta_p
        TheoryHarness.check_stall_precondition(env, policy, delta_p)

        total = experiment.total_samples
        trials = experiment.trials
        questions = rng.integers(env.num_questions, size=(trials, total))
        hit = np.zeros((trials, total), dtype=bool)
        for q in range(env.num_questions):
            where = questions == q
            probs = TabularModel.softmax_probs(policy, q)
            actions = TabularModel.draw(probs, int(where.sum()), rng)
            hit[where] = env.correct_mask(q)[actions]

        no_update = int((~hit.any(axis=1)).sum())
        frequency = no_update / trials
        bound = (1.0 - delta_p) ** total
        half, status = StatCheck.at_least(frequency, bound, trials, max_halfwidth)
        done = experiment.model_copy(update={"no_update_count": no_update, "solve_count": trials - no_update})
        row = ExperimentRow(
            experiment="lower_bound",
            grid_point=f"delta_p={delta_p:g},N={total}",
            empirical=frequency,
            bound=bound,
            ci_halfwidth=half,
            status=status,
            note=f"c={total * delta_p:g}",
        )
        return done, row

    # Presupuesto con pista

    @staticmethod
    def validate_hint(
            env: Environment,
            policy: PolicyTable,
            hint: HintSpec,
            rng: np.random.Generator,
            samples: int = 20_000,
            confidence: float = 0.9999,
    ) -> HintCheck:
        """
        Comprueba P(h_q|q) >= delta_p' y que alguna solución cumpla
        P(s_q|q, h_q) >= delta_p', de forma exacta y por Monte Carlo.
        """
        q = hint.question_id
        delta = hint.delta_p_prime
        if hint.hint_actions is not None:
            mask = np.zeros(env.num_actions, dtype=bool)
            mask[hint.hint_actions] = True
            probs = TabularModel.softmax_probs(policy, q)
            conditional = TabularModel.masked_softmax_probs(policy, q, mask)
            candidates = np.flatnonzero(env.correct_mask(q) & mask)
            if candidates.size == 0:
                raise PreconditionError(f"hint of question {q} contains no solution")
            best = int(candidates[np.argmax(conditional[candidates])])
            hint_mass = float(probs[mask].sum())
            solution_given_hint = float(conditional[best])

            in_hint = int(mask[TabularModel.draw(probs, samples, rng)].sum())
            hits = int((TabularModel.draw(conditional, samples, rng) == best).sum())
        else:
            depth = hint.hint_depth
            if env.kind != "chain" or depth >= env.depth:
                raise PreconditionError("hint depth needs a chain environment deeper than the hint")
            step_probs = [
                TabularModel.softmax_probs(policy, env.column(q, t))[env.correct_mask(q, t)].sum()
                for t in range(env.depth)
            ]
            hint_mass = float(np.prod(step_probs[:depth]))
            solution_given_hint = float(np.prod(step_probs[depth:]))

            unhinted = TabularModel.sample_trajectories(policy, env, TabularPrompt(question=q), samples, rng)
            in_hint = sum(all(env.correct_mask(q, t)[tok] for t, tok in enumerate(traj.tokens[:depth])) for traj in unhinted)
            prompt = TabularPrompt(question=q, p=depth / env.depth)
            hinted = TabularModel.sample_trajectories(policy, env, prompt, samples, rng)
            hits = sum(traj.success for traj in hinted)

        check = HintCheck(
            hint_mass=hint_mass,
            solution_given_hint=solution_given_hint,
            hint_mass_ci=StatCheck.clopper_pearson(in_hint, samples, confidence),
            solution_given_hint_ci=StatCheck.clopper_pearson(hits, samples, confidence),
        )
        tolerance = delta * (1.0 - 1e-9)
        if hint_mass < tolerance or solution_given_hint < tolerance:
            raise PreconditionError(
                f"hint of question {q} fails delta_p'={delta:g}: P(h|q)={hint_mass:.4g}, P(s|q,h)={solution_given_hint:.4g}"
            )
        if check.hint_mass_ci[1] < delta or check.solution_given_hint_ci[1] < delta:
            raise PreconditionError(f"Monte Carlo rejects the hint of question {q} at delta_p'={delta:g}")
        return check

    @staticmethod
    def check_delta_relation(hint: HintSpec, delta_p: float | None) -> tuple[float, str]:
        """
        Comprueba delta_p' = delta_p^(1/2 - epsilon) cuando se da delta_p.

        Devuelve el delta_p efectivo y la nota de la fila.
        """
        if delta_p is None:
            return hint.implied_delta_p, f"implied delta_p={hint.implied_delta_p:.3g}"
        if not hint.matches_delta_p(delta_p, rel_tol=1e-6):
            raise PreconditionError(
                f"delta_p'={hint.delta_p_prime:g} is not delta_p^(1/2-{hint.epsilon:g}) for delta_p={delta_p:g}"
            )
        return delta_p, f"delta_p={delta_p:g} matches delta_p'"

    @staticmethod
    def verify_hint_budget(
            env: Environment,
            policy: PolicyTable,
            hint: HintSpec,
            trials: int,
            rng: np.random.Generator,
            budget_factor: float = 10.0,
            max_halfwidth: float = 0.1,
            delta_p: float | None = None,
    ) -> tuple[BudgetExperiment, ExperimentRow]:
        """
        Con N = ceil(budget_factor / delta_p') muestras condicionadas a
        (q, h_q) se encuentra una solución con probabilidad >= 1 - (1 - delta_p')^N.
        """
        if hint.hint_actions is None:
            raise PreconditionError("hint budget experiment runs on flat hint sets")
        effective_delta_p, note = TheoryHarness.check_delta_relation(hint, delta_p)
        TheoryHarness.validate_hint(env, policy, hint, rng)

        q = hint.question_id
        delta = hint.delta_p_prime
        total = math.ceil(budget_factor / delta)
        mask = np.zeros(env.num_actions, dtype=bool)
        mask[hint.hint_actions] = True
        conditional = TabularModel.masked_softmax_probs(policy, q, mask)
        draws = TabularModel.draw(conditional, trials * total, rng).reshape(trials, total)
        solved = env.correct_mask(q)[draws].any(axis=1)

        solve_count = int(solved.sum())
        experiment = BudgetExperiment(
            steps=1,
            batch=total,
            trials=trials,
            delta_p=effective_delta_p,
            no_update_count=trials - solve_count,
            solve_count=solve_count,
        )
        frequency = solve_count / trials
        analytic = 1.0 - (1.0 - delta) ** total
        bound = min(0.99, analytic)
        half, status = StatCheck.at_least(frequency, bound, trials, max_halfwidth)
        row = ExperimentRow(
            experiment="hint_budget",
            grid_point=f"delta_p'={delta:g},N={total}",
            empirical=frequency,
            bound=bound,
            ci_halfwidth=half,
            status=status,
            note=note,
        )
        return experiment, row

    # Presupuesto en raíz cuadrada

    @staticmethod
    def samples_to_first_success(
            sampler: Callable[[int], np.ndarray],
            trials: int,
            block: int,
    ) -> np.ndarray:
        """
        Número de muestras hasta el primer éxito en cada ensayo.

        sampler(m) devuelve m indicadores de éxito independientes.
        """
        counts = np.zeros(trials, dtype=np.int64)
        pending = np.arange(trials)
        offset = 0
        while pending.size:
            hits = sampler(pending.size * block).reshape(pending.size, block)
            found = hits.any(axis=1)
            counts[pending[found]] = offset + hits[found].argmax(axis=1) + 1
            pending = pending[~found]
            offset += block
        return counts

    @staticmethod
    def geometric_median(p: float) -> int:
        if p >= 1.0:
            return 1
        return math.ceil(math.log(2.0) / -math.log1p(-p))

    @staticmethod
    def sqrt_budget_experiment(
            delta_p_prime: float,
            trials: int,
            rng: np.random.Generator,
            check_samples: int = 200_000,
    ) -> SqrtBudgetReport:
        """
        Cadena de dos pasos con probabilidad delta_p' por paso: compara las
        muestras hasta la primera solución sin pista (orden 1/delta_p'^2)
        con las de cada etapa con pista (orden 1/delta_p').
        """
        chain = TheoryHarness.two_step_chain(delta_p_prime)
        stage = Environment(kind="chain", num_actions=chain.num_actions, depth=1, questions=[QuestionSpec(steps=[[0]])])
        joint = [delta_p_prime, delta_p_prime]
        single = [delta_p_prime]

        flat_p = delta_p_prime ** 2
        measured = float(TabularModel.chain_successes(chain, joint, check_samples, rng).mean())
        tolerance = 4.0 * math.sqrt(flat_p * (1.0 - flat_p) / check_samples) + 1e-12
        if abs(measured - flat_p) > tolerance:
            raise PreconditionError(f"two-step success rate {measured:.3g} differs from delta_p'^2={flat_p:.3g}")

        def block_for(p: float) -> int:
            return int(min(100_000, max(16, math.ceil(2.0 / p))))

        unhinted = TheoryHarness.samples_to_first_success(
            lambda m: TabularModel.chain_successes(chain, joint, m, rng), trials, block_for(flat_p)
        )
        hint_stage = TheoryHarness.samples_to_first_success(
            lambda m: TabularModel.chain_successes(stage, single, m, rng), trials, block_for(delta_p_prime)
        )
        solve_stage = TheoryHarness.samples_to_first_success(
            lambda m: TabularModel.chain_successes(stage, single, m, rng), trials, block_for(delta_p_prime)
        )
        return SqrtBudgetReport(
            delta_p_prime=delta_p_prime,
            unhinted_median=float(np.median(unhinted)),
            hint_stage_median=float(np.median(hint_stage)),
            solve_stage_median=float(np.median(solve_stage)),
            hinted_total_median=float(np.median(hint_stage + solve_stage)),
            analytic_unhinted_median=TheoryHarness.geometric_median(flat_p),
            analytic_stage_median=TheoryHarness.geometric_median(delta_p_prime),
        )

    @staticmethod
    def sqrt_budget_row(report: SqrtBudgetReport, required_speedup: float = 5.0) -> ExperimentRow:
        bound = report.unhinted_median / required_speedup
        if report.delta_p_prime <= 0.1:
            status: RowStatus = "pass" if report.solve_stage_median < bound else "fail"
        else:
            status = "pass"
        return ExperimentRow(
            experiment="sqrt_budget",
            grid_point=f"delta_p'={report.delta_p_prime:g}",
            empirical=report.solve_stage_median,
            bound=bound,
            ci_halfwidth=0.0,
            status=status,
            note=(
                f"unhinted median {report.unhinted_median:g} (analytic {report.analytic_unhinted_median}), "
                f"stage median {report.solve_stage_median:g} (analytic {report.analytic_stage_median}), "
                f"hinted total {report.hinted_total_median:g}"
            ),
        )

    @staticmethod
    def speedup_monotone_row(reports: Sequence[SqrtBudgetReport]) -> ExperimentRow:
        """La ganancia crece a medida que delta_p' baja"""
        ordered = sorted(reports, key=lambda r: -r.delta_p_prime)
        speedups = [r.speedup for r in ordered]
        monotone = all(a < b for a, b in zip(speedups, speedups[1:]))
        return ExperimentRow(
            experiment="sqrt_budget_monotone",
            grid_point=",".join(f"{r.delta_p_prime:g}" for r in ordered),
            empirical=speedups[-1] if speedups else 0.0,
            bound=speedups[0] if speedups else 0.0,
            ci_halfwidth=0.0,
            status="pass" if monotone else "fail",
            note="speedups " + ", ".join(f"{s:.3g}" for s in speedups),
        )

    # Cota superior con un paso de gradiente

    @staticmethod
    def one_step_pg_to_target(
            policy: PolicyTable,
            q: int,
            samples: Sequence[int] | np.ndarray,
            solution_set: set[int],
            target: float = 0.99,
            max_doublings: int = 60,
    ) -> OneStepResult:
        """
        PG[:, q] = (1/N) sum_i 1[s_i in S_q] (e_{s_i} - mu(.|q)), luego
        theta[:, q] + eta * PG con eta = 1, 2, 4, ... hasta que la masa de
        S_q alcance `target`.
        """
        drawn = np.asarray(samples, dtype=np.int64)
        found = sorted(set(drawn.tolist()) & set(solution_set))
        if not found:
            raise TargetUnreachable(f"no solution of question {q} among {drawn.size} samples")
        found_mask = np.zeros(policy.num_actions, dtype=bool)
        found_mask[found] = True

        probs = TabularModel.softmax_probs(policy, q)
        if probs[found_mask].sum() >= target:
            return OneStepResult(policy=policy, eta=0.0, mass=float(probs[found_mask].sum()),
                                 gradient=np.zeros(policy.num_actions), found=found)

        indicator = found_mask[drawn]
        fraction = indicator.mean()
        gradient = np.bincount(drawn[indicator], minlength=policy.num_actions) / drawn.size - fraction * probs

        # Las dos observaciones de la prueba
        outside = np.unique(drawn[~indicator])
        if outside.size and np.any(gradient[outside] >= 0.0):
            raise InvariantViolation(f"policy gradient is not negative on sampled non-solutions of question {q}")
        if not np.any(gradient[found_mask] > 0.0):
            raise InvariantViolation(f"policy gradient has no positive entry on S_q for question {q}")

        eta = 1.0
        for _ in range(max_doublings + 1):
            column = policy.theta[:, q] + eta * gradient
            mass = float(TabularModel.softmax_probs(PolicyTable(theta=column[:, None]), 0)[found_mask].sum())
            if mass >= target:
                return OneStepResult(policy=policy.with_column(q, column), eta=eta, mass=mass,
                                     gradient=gradient, found=found)
            eta *= 2.0
        raise TargetUnreachable(f"mass {mass:.4g} below {target} after {max_doublings} doublings")

    @staticmethod
    def verify_upper_bound(
            env: Environment,
            policy: PolicyTable,
            hints: Sequence[HintSpec],
            trials: int,
            rng: np.random.Generator,
            budget_factor: float = 10.0,
            target: float = 0.99,
            max_halfwidth: float = 0.1,
            delta_p: float | None = None,
    ) -> UpperBoundOutcome:
        """
        Muestrea ceil(budget_factor / delta_p') acciones condicionadas a la
        pista por pregunta (Theta(|Q| / delta_p') en total), aplica un paso
        de gradiente por pregunta y mide la fracción de ensayos con
        E_q[P(tau in S(q))] >= target.
        """
        if len(hints) != env.num_questions:
            raise PreconditionError("every question needs a hint")
        relations = sorted({TheoryHarness.check_delta_relation(hint, delta_p)[1] for hint in hints})
        for hint in hints:
            TheoryHarness.validate_hint(env, policy, hint, rng, samples=5_000)

        delta = min(hint.delta_p_prime for hint in hints)
        per_question = math.ceil(budget_factor / delta)
        conditionals = []
        for hint in hints:
            mask = np.zeros(env.num_actions, dtype=bool)
            mask[hint.hint_actions] = True
            conditionals.append(TabularModel.masked_softmax_probs(policy, hint.question_id, mask))
        base_mass = TheoryHarness.solution_probabilities(env, policy)

        successes = 0
        sign_checks = 0
        for _ in range(trials):
            masses = []
            for hint, conditional in zip(hints, conditionals):
                q = hint.question_id
                drawn = TabularModel.draw(conditional, per_question, rng)
                try:
                    result = TheoryHarness.one_step_pg_to_target(policy, q, drawn, env.solution_set(q), target)
                except TargetUnreachable:
                    masses.append(base_mass[q])
                    continue
                if result.eta > 0 and not env.correct_mask(q)[drawn].all():
                    sign_checks += 1
                masses.append(result.mass)
            if np.mean(masses) >= target:
                successes += 1

        fraction = successes / trials
        half, status = StatCheck.at_least(fraction, 0.99, trials, max_halfwidth)
        row = ExperimentRow(
            experiment="upper_bound",
            grid_point=f"|Q|={env.num_questions},delta_p'={delta:g},N={per_question * env.num_questions}",
            empirical=fraction,
            bound=0.99,
            ci_halfwidth=half,
            status=status,
            note=f"{'; '.join(relations)}; sign observations held in {sign_checks} mixed-sample updates",
        )
        return UpperBoundOutcome(success_fraction=fraction, sign_checks=sign_checks, row=row)

    # Chequeos auxiliares

    @staticmethod
    def conditioning_consistency(delta: float, trials: int, rng: np.random.Generator) -> ExperimentRow:
        """P(h y s) conjunta frente a P(h) * P(s|h) en la cadena de dos pasos"""
        env = TheoryHarness.two_step_chain(delta)
        policy = env.initial_policy()
        unhinted = TabularModel.sample_trajectories(policy, env, TabularPrompt(question=0), trials, rng)
        hinted = TabularModel.sample_trajectories(policy, env, TabularPrompt(question=0, p=0.5), trials, rng)

        joint = float(np.mean([traj.success for traj in unhinted]))
        p_hint = float(np.mean([env.correct_mask(0, 0)[traj.tokens[0]] for traj in unhinted]))
        p_solve = float(np.mean([traj.success for traj in hinted]))
        product = p_hint * p_solve
        variance = (joint * (1 - joint) + p_solve ** 2 * p_hint * (1 - p_hint) + p_hint ** 2 * p_solve * (1 - p_solve)) / trials
        half = 3.0 * math.sqrt(variance)
        return ExperimentRow(
            experiment="conditioning",
            grid_point=f"delta={delta:g}",
            empirical=joint,
            bound=product,
            ci_halfwidth=half,
            status="pass" if abs(joint - product) <= half else "fail",
            note=f"P(h)={p_hint:.4g}, P(s|h)={p_solve:.4g}",
        )

    @staticmethod
    def positivity_check(cfg: BoundedLogitConfig, max_length: int = 1_000_000) -> ExperimentRow:
        """El piso logarítmico c^n sigue siendo finito hasta n = max_length"""
        floor = TabularModel.positivity_floor(cfg, max_length)
        return ExperimentRow(
            experiment="positivity",
            grid_point=f"M={cfg.logit_bound:g},T={cfg.temperature:g},|V|={cfg.vocab_size},n={max_length}",
            empirical=floor,
            bound=-math.inf,
            ci_halfwidth=0.0,
            status="pass" if math.isfinite(floor) else "fail",
            note="log-space floor",
        )

    # Grilla completa

    @staticmethod
    def refused_row(experiment: str, grid_point: str, bound: float, error: Exception) -> ExperimentRow:
        return ExperimentRow(experiment=experiment, grid_point=grid_point, empirical=math.nan, bound=bound,
                             ci_halfwidth=math.nan, status="refused", note=str(error))

    @staticmethod
    def run_grid(config: TheoryConfig, streams: SeedStreams) -> list[ExperimentRow]:
        rows: list[ExperimentRow] = []
        limit = config.max_ci_halfwidth

        grid = config.lower_bound
        for i, delta_p in enumerate(grid.delta_p):
            for j, multiplier in enumerate(grid.budget_multipliers):
                total = max(1, math.ceil(multiplier / delta_p - 1e-9))
                batch = 10 if total % 10 == 0 else 1
                experiment = BudgetExperiment(steps=total // batch, batch=batch, trials=config.trials, delta_p=delta_p)
                env = TheoryHarness.stall_environment(grid.num_questions, grid.num_actions, grid.solution_fraction * delta_p)
                try:
                    _, row = TheoryHarness.verify_lower_bound(
                        env, env.initial_policy(), experiment, streams.stream("lower_bound", i * 100 + j), limit
                    )
                except PreconditionError as e:
                    logger.warning("lower bound at delta_p=%g refused: %s", delta_p, e)
                    row = TheoryHarness.refused_row(
                        "lower_bound", f"delta_p={delta_p:g},N={total}", (1 - delta_p) ** total, e
                    )
                rows.append(row)

        hint_grid = config.hint_budget
        for i, (delta, paired) in enumerate(hint_grid.pairs()):
            try:
                env, hints = TheoryHarness.hinted_environment(1, hint_grid.num_actions, delta, hint_grid.hint_size, config.epsilon)
                _, row = TheoryHarness.verify_hint_budget(
                    env, env.initial_policy(), hints[0], hint_grid.trials or config.trials,
                    streams.stream("hint_budget", i), hint_grid.budget_factor, limit, paired,
                )
                rows.append(row)
            except PreconditionError as e:
                logger.warning("hint budget at delta_p'=%g refused: %s", delta, e)
                rows.append(TheoryHarness.refused_row("hint_budget", f"delta_p'={delta:g}", 0.99, e))

        sqrt_grid = config.sqrt_budget
        reports: list[SqrtBudgetReport] = []
        for i, delta in enumerate(sqrt_grid.delta_p_prime):
            try:
                report = TheoryHarness.sqrt_budget_experiment(
                    delta, sqrt_grid.trials or config.trials, streams.stream("sqrt_budget", i)
                )
            except PreconditionError as e:
                logger.warning("sqrt budget at delta_p'=%g refused: %s", delta, e)
                rows.append(TheoryHarness.refused_row("sqrt_budget", f"delta_p'={delta:g}", math.nan, e))
                continue
            reports.append(report)
            rows.append(TheoryHarness.sqrt_budget_row(report, sqrt_grid.required_speedup))
        if len(reports) > 1:
            rows.append(TheoryHarness.speedup_monotone_row(reports))

        upper = config.upper_bound
        for i, (delta, paired) in enumerate(upper.pairs()):
            try:
                env, hints = TheoryHarness.hinted_environment(
                    upper.num_questions, upper.num_actions, delta, upper.hint_size, config.epsilon
                )
                outcome = TheoryHarness.verify_upper_bound(
                    env, env.initial_policy(), hints, upper.trials or config.trials,
                    streams.stream("upper_bound", i), upper.budget_factor, upper.target_mass, limit, paired,
                )
                rows.append(outcome.row)
            except PreconditionError as e:
                logger.warning("upper bound at delta_p'=%g refused: %s", delta, e)
                rows.append(TheoryHarness.refused_row("upper_bound", f"delta_p'={delta:g}", 0.99, e))
            except InvariantViolation as e:
                rows.append(ExperimentRow(experiment="upper_bound", grid_point=f"delta_p'={delta:g}",
                                          empirical=math.nan, bound=0.99, ci_halfwidth=math.nan,
                                          status="fail", note=str(e)))

        rows.append(TheoryHarness.conditioning_consistency(
            config.conditioning_delta, config.conditioning_trials, streams.stream("conditioning")
        ))
        rows.append(TheoryHarness.positivity_check(BoundedLogitConfig(logit_bound=10.0, temperature=1.0, vocab_size=50_000)))
        return rows
