import logging
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, TypeVar

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .core.curation import Curator
from .core.grpo import GRPOTrainer
from .core.oracles import RolloutOracle, ScriptedOracle, TabularPolicyOracle
from .core.passk import PassAtK
from .core.rng import SeedStreams
from .core.tabular import TabularModel
from .core.theory import TheoryHarness
from .errors import ConfigError, QuestaError
from .models.corpus import PSchedule, QuestionRecord
from .models.environment import Environment
from .models.metrics import SampleTally
from .models.policy import PolicyTable
from .models.run import ProjectConfig, RunConfig
from .models.theory import ExperimentRow, TheoryConfig
from .models.training import StepReport
from .parsers.config_parser import ConfigParser
from .parsers.corpus_parser import CorpusParser
from .parsers.tally_parser import TallyParser
from .transformers.to_csv import CSVTransformer
from .transformers.to_jsonl import JSONLTransformer
from .transformers.to_manifest import MANIFEST_NAME, ManifestTransformer
from .transformers.to_prompt import PromptTransformer

app = typer.Typer(
    name="questa",
    help="Partial-solution question augmentation, tabular GRPO training, pass@k and learnability checks",
)
console = Console()
logger = logging.getLogger(__name__)

T = TypeVar("T")

STATUS_STYLE = {"pass": "green", "fail": "red", "inconclusive": "yellow", "refused": "magenta"}


@app.callback()
def main(
        verbose: bool = typer.Option(False, "--verbose", "-v", envvar="QUESTA_VERBOSE", help="Enable debug logging"),
):
    """
    questa-lab: laboratorio de escritorio para entrenamiento con pistas parciales
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextmanager
def _handled() -> Iterator[None]:
    """Traduce los errores del laboratorio a códigos de salida"""
    try:
        yield
    except QuestaError as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(e.exit_code)
    except ValidationError as e:
        console.print(f"[red]Error:[/red] {ConfigError.from_validation(e)}")
        raise typer.Exit(2)


def _parse_list(text: str, cast: Callable[[str], T], flag: str) -> list[T]:
    try:
        values = [cast(item.strip()) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"{flag}: cannot parse '{text}'") from e
    if not values:
        raise ConfigError(f"{flag}: empty list")
    return values


def _load_project(config: Path | None) -> ProjectConfig:
    if config is None:
        return ProjectConfig()
    if not config.exists():
        raise ConfigError(f"config file '{config}' not found")
    return ConfigParser.parse_file(config)


def _start(
        command: str,
        project: ProjectConfig,
        seed: int | None,
        out: Path,
        force: bool,
        overrides: dict[str, Any],
) -> ManifestTransformer:
    """Fija la semilla efectiva, prepara el directorio y abre el manifiesto"""
    root_seed = seed if seed is not None else (project.seed or 0)
    run = RunConfig(command=command, seed=root_seed, out=out, force=force, project=project, overrides=overrides)
    ManifestTransformer.prepare_out(out, force)
    console.print(f"[cyan]{command}[/cyan] seed={root_seed} → {out}")
    return ManifestTransformer(run)


def _tally_rows(tallies: list[SampleTally]) -> list[list[Any]]:
    return [[tally.question_id, tally.n, tally.c] for tally in tallies]


def _build_oracle(project: ProjectConfig, records: list[QuestionRecord]) -> RolloutOracle:
    settings = project.curate.oracle
    if settings.kind == "scripted":
        return ScriptedOracle(settings.pass_counts, set(settings.failing_ids))
    env = project.environment
    if env is None:
        raise ConfigError("the tabular oracle needs an environment section")
    # Los registros se asignan a las preguntas por orden de aparición
    question_of = {record.id: idx % env.num_questions for idx, record in enumerate(records)}
    return TabularPolicyOracle(env, env.initial_policy(), question_of, settings.temperature)


def _initial_policy(env: Environment, policy_file: Path | None) -> PolicyTable:
    if policy_file is None:
        return env.initial_policy()
    policy = ConfigParser.parse_policy_file(policy_file)
    expected = (env.num_actions, env.num_columns)
    if policy.theta.shape != expected:
        raise ConfigError(f"policy '{policy_file}' has shape {policy.theta.shape}, environment needs {expected}")
    return policy


@app.command()
def curate(
        input_file: Path = typer.Option(None, "--input", "-i", envvar="QUESTA_INPUT", help="JSONL corpus to filter"),
        config: Path = typer.Option(None, "--config", "-c", envvar="QUESTA_CONFIG", help="YAML/JSON config file"),
        seed: int = typer.Option(None, "--seed", min=0, envvar="QUESTA_SEED", help="Root seed"),
        out: Path = typer.Option(Path("runs/curate"), "--out", "-o", envvar="QUESTA_OUT", help="Output directory"),
        force: bool = typer.Option(False, "--force", envvar="QUESTA_FORCE", help="Overwrite a non-empty output directory"),
        keep: str = typer.Option(None, "--keep", envvar="QUESTA_KEEP", help="Pass counts to keep, e.g. 0,1"),
        n_eval: int = typer.Option(None, "--n-eval", min=1, envvar="QUESTA_N_EVAL", help="Oracle calls per record"),
        workers: int = typer.Option(None, "--workers", min=1, envvar="QUESTA_WORKERS", help="Concurrent records"),
):
    """
    Keep the records the oracle solves 0 or 1 times out of n_eval
    """
    with _handled():
        project = _load_project(config)
        section = project.curate
        source = input_file or section.input
        if source is None:
            raise ConfigError("no input corpus: pass --input or set curate.input")
        keep_counts = _parse_list(keep, int, "--keep") if keep else section.keep_counts
        n_eval = n_eval or section.n_eval
        workers = workers or section.workers

        records = CorpusParser.parse_file(source)
        oracle = _build_oracle(project, records)
        writer = _start("curate", project, seed, out, force, {
            "input": str(source), "keep_counts": keep_counts, "n_eval": n_eval, "workers": workers,
        })
        root_seed = writer.config.seed

        result = Curator(oracle, n_eval, keep_counts, workers).curate(records, SeedStreams(root_seed))
        writer.write("curated.jsonl", JSONLTransformer.to_jsonl(result.kept, root_seed, "curated"))
        writer.write("curate_skips.jsonl", JSONLTransformer.to_jsonl(result.skipped, root_seed, "curate_skips"))
        writer.write("pass_counts.csv", CSVTransformer.to_csv(
            ["pass_count", "records"], sorted(result.pass_count_histogram.items()), root_seed, "pass_counts"
        ))
        writer.finish()

    table = Table(title="Oracle pass counts")
    table.add_column("pass_count", justify="right")
    table.add_column("records", justify="right")
    table.add_column("kept")
    for count, total in sorted(result.pass_count_histogram.items()):
        table.add_row(str(count), str(total), "✓" if count in keep_counts else "")
    console.print(table)
    console.print(
        f"[green]✓[/green] Kept {len(result.kept)} of {len(records)} records "
        f"({result.dropped} dropped, {len(result.skipped)} skipped)"
    )


@app.command()
def augment(
        input_file: Path = typer.Option(None, "--input", "-i", envvar="QUESTA_INPUT", help="Curated JSONL corpus"),
        config: Path = typer.Option(None, "--config", "-c", envvar="QUESTA_CONFIG", help="YAML/JSON config file"),
        p: str = typer.Option(None, "--p", envvar="QUESTA_P", help="Partial-solution ratios, e.g. 0.25,0.5"),
        seed: int = typer.Option(None, "--seed", min=0, envvar="QUESTA_SEED", help="Root seed"),
        out: Path = typer.Option(Path("runs/augment"), "--out", "-o", envvar="QUESTA_OUT", help="Output directory"),
        force: bool = typer.Option(False, "--force", envvar="QUESTA_FORCE", help="Overwrite a non-empty output directory"),
):
    """
    Render one hinted prompt per record and ratio p
    """
    with _handled():
        project = _load_project(config)
        section = project.augment
        source = input_file or section.input
        if source is None:
            raise ConfigError("no input corpus: pass --input or set augment.input")
        p_values = _parse_list(p, float, "--p") if p else section.p_values

        records = CorpusParser.parse_file(source)
        result = PromptTransformer.augment_dataset(records, p_values)
        writer = _start("augment", project, seed, out, force, {"input": str(source), "p_values": p_values})
        root_seed = writer.config.seed

        by_id = {record.id: record for record in records}
        rows = [
            {
                **by_id[prompt.source_id].model_dump(mode="json"),
                "p": prompt.p,
                "hint": prompt.hint,
                "rendered": prompt.rendered,
            }
            for prompt in result.prompts
        ]
        writer.write("augmented.jsonl", JSONLTransformer.to_jsonl(rows, root_seed, "augmented"))
        writer.write("augment_skips.jsonl", JSONLTransformer.to_jsonl(result.skipped, root_seed, "augment_skips"))
        writer.finish()

    console.print(
        f"[green]✓[/green] Wrote {len(result.prompts)} prompts for p={p_values} "
        f"({len(result.skipped)} records skipped)"
    )


def _control_schedule(schedule: PSchedule) -> PSchedule:
    """Mismo número de prompts por paso, todos sin pista"""
    width = len(schedule.values) if schedule.kind == "mixture" else 1
    return PSchedule(kind="mixture" if width > 1 else "constant", values=[0.0] * width)


@app.command("train-tabular")
def train_tabular(
        config: Path = typer.Option(None, "--config", "-c", envvar="QUESTA_CONFIG", help="Config with an environment section"),
        environment: Path = typer.Option(None, "--environment", "-e", envvar="QUESTA_ENVIRONMENT", help="Environment file, replaces the config section"),
        policy_file: Path = typer.Option(None, "--policy", envvar="QUESTA_POLICY", help="Start from a saved policy.json"),
        seed: int = typer.Option(None, "--seed", min=0, envvar="QUESTA_SEED", help="Root seed"),
        out: Path = typer.Option(Path("runs/train"), "--out", "-o", envvar="QUESTA_OUT", help="Output directory"),
        force: bool = typer.Option(False, "--force", envvar="QUESTA_FORCE", help="Overwrite a non-empty output directory"),
        steps: int = typer.Option(None, "--steps", min=0, envvar="QUESTA_STEPS", help="Training steps"),
        p: str = typer.Option(None, "--p", envvar="QUESTA_P", help="Hint ratios mixed in every step, e.g. 0.5,0"),
        control: bool = typer.Option(False, "--control", help="Same sample budget with every hint removed"),
        n_eval: int = typer.Option(None, "--n-eval", min=1, envvar="QUESTA_N_EVAL", help="No-hint samples per question"),
):
    """
    Train a tabular policy with hinted prompts and evaluate without hints
    """
    with _handled():
        project = _load_project(config)
        if environment is not None:
            env = ConfigParser.parse_environment_file(environment)
            project = project.model_copy(update={"environment": env})
        env = project.environment
        if env is None:
            raise ConfigError("config has no environment section and no --environment was given")

        trainer_config = project.trainer
        schedule = trainer_config.hint_schedule
        if p:
            values = _parse_list(p, float, "--p")
            schedule = PSchedule(kind="mixture" if len(values) > 1 else "constant", values=values)
        if control:
            schedule = _control_schedule(schedule)
        update: dict[str, Any] = {"hint_schedule": schedule}
        if steps is not None:
            update["steps"] = steps
        trainer_config = trainer_config.model_copy(update=update)
        n_eval = n_eval or project.evaluation.n_eval
        policy = _initial_policy(env, policy_file)

        writer = _start("train-tabular", project, seed, out, force, {
            "steps": trainer_config.steps,
            "hint_schedule": schedule.model_dump(mode="json"),
            "control": control,
            "n_eval": n_eval,
            "policy": str(policy_file) if policy_file is not None else None,
        })
        root_seed = writer.config.seed
        streams = SeedStreams(root_seed)

        # Misma semilla para ambas evaluaciones: con 0 pasos coinciden
        before = TabularModel.evaluate_without_hint(policy, env, n_eval, streams.stream("evaluate"))

        def on_step(report: StepReport) -> None:
            logger.debug("step %d: reward=%.4f retained=%d", report.step, report.mean_reward, report.retained_groups)

        run = GRPOTrainer(env, trainer_config).train_loop(policy, streams.stream("train"), on_step=on_step)
        after = TabularModel.evaluate_without_hint(run.policy, env, n_eval, streams.stream("evaluate"))

        hist_before = PassAtK.histogram(before)
        hist_after = PassAtK.histogram(after)
        diff = PassAtK.solved_set_diff(before, after, 1)

        writer.write("step_report.csv", CSVTransformer.to_csv(
            StepReport.csv_columns(), run.reports, root_seed, "step_report"
        ))
        writer.write("policy.json", PolicyTable(theta=run.policy.theta, seed=root_seed).model_dump_json(indent=2) + "\n")
        writer.write("tallies_before.csv", CSVTransformer.to_csv(
            ["question_id", "n", "c"], _tally_rows(before), root_seed, "tallies_before"
        ))
        writer.write("tallies_after.csv", CSVTransformer.to_csv(
            ["question_id", "n", "c"], _tally_rows(after), root_seed, "tallies_after"
        ))
        writer.write("histogram.csv", CSVTransformer.to_csv(
            ["correct", "before", "after"],
            [[c, b, a] for c, (b, a) in enumerate(zip(hist_before, hist_after))],
            root_seed,
            "histogram",
        ))
        writer.finish()

    table = Table(title=f"No-hint correct samples out of {n_eval}")
    table.add_column("correct", justify="right")
    table.add_column("before", justify="right")
    table.add_column("after", justify="right")
    for c, (b, a) in enumerate(zip(hist_before, hist_after)):
        table.add_row(str(c), str(b), str(a))
    console.print(table)
    updated = sum(report.updated for report in run.reports)
    console.print(f"[cyan]Updated steps:[/cyan] {updated}/{len(run.reports)}")
    console.print(f"[cyan]Newly solved:[/cyan] {', '.join(diff.newly_solved) or '-'}")
    console.print(f"[cyan]Regressed:[/cyan] {', '.join(diff.regressed) or '-'}")
    console.print(f"[green]✓[/green] Unsolved questions {hist_before[0]} → {hist_after[0]}")


@app.command()
def passk(
        tallies: Path = typer.Option(None, "--tallies", "-t", envvar="QUESTA_TALLIES", help="CSV with question_id,n,c"),
        compare: Path = typer.Option(None, "--compare", envvar="QUESTA_COMPARE", help="Second tally file for solved-set diffs"),
        k: str = typer.Option(None, "--k", envvar="QUESTA_K", help="Values of k, e.g. 1,4,8"),
        strict: bool = typer.Option(None, "--strict/--no-strict", help="Reject k with 2k > n"),
        true_p: float = typer.Option(None, "--true-p", min=0.0, max=1.0, help="Compare both estimators at this success rate"),
        n_samples: int = typer.Option(16, "--n-samples", min=1, help="Samples per question for --true-p"),
        trials: int = typer.Option(10_000, "--trials", min=1, envvar="QUESTA_TRIALS", help="Resampling trials for --true-p"),
        config: Path = typer.Option(None, "--config", "-c", envvar="QUESTA_CONFIG", help="YAML/JSON config file"),
        seed: int = typer.Option(None, "--seed", min=0, envvar="QUESTA_SEED", help="Root seed"),
        out: Path = typer.Option(Path("runs/passk"), "--out", "-o", envvar="QUESTA_OUT", help="Output directory"),
        force: bool = typer.Option(False, "--force", envvar="QUESTA_FORCE", help="Overwrite a non-empty output directory"),
):
    """
    Estimate pass@k with the unbiased and the naive estimators
    """
    with _handled():
        project = _load_project(config)
        section = project.passk
        source = tallies or section.tallies
        if source is None:
            raise ConfigError("no tally file: pass --tallies or set passk.tallies")
        ks = _parse_list(k, int, "--k") if k else section.k_values
        strict = section.strict if strict is None else strict
        compare = compare or section.compare

        rows = TallyParser.parse_file(source)
        other = TallyParser.parse_file(compare) if compare else None
        writer = _start("passk", project, seed, out, force, {
            "tallies": str(source), "compare": str(compare) if compare else None, "k_values": ks, "strict": strict,
        })
        root_seed = writer.config.seed

        columns = ["question_id", "n", "c", "k", "estimate"]
        reports = {"unbiased": [], "naive": []}
        for estimator, collected in reports.items():
            for value in ks:
                report = PassAtK.report(rows, value, estimator, strict)
                collected.append(report)
            lines = [
                [row.question_id, row.n, row.c, row.k, row.estimate] for report in collected for row in report.rows
            ] + [["mean", "", "", report.k, report.mean] for report in collected]
            writer.write(f"passk_{estimator}.csv", CSVTransformer.to_csv(columns, lines, root_seed, f"passk_{estimator}"))

        curve = [
            [u.k, u.mean, n.mean, len(u.rows), len(u.skipped)]
            for u, n in zip(reports["unbiased"], reports["naive"])
        ]
        writer.write("curve.csv", CSVTransformer.to_csv(
            ["k", "unbiased_mean", "naive_mean", "questions", "skipped"], curve, root_seed, "curve"
        ))

        min_n = min((tally.n for tally in rows), default=0)
        usable = [value for value in ks if value <= min_n]
        unsolved = {value: PassAtK.unsolved_indices(rows, value) for value in usable}
        writer.write("unsolved.csv", CSVTransformer.to_csv(
            ["k", "question_id"],
            [[value, qid] for value, ids in unsolved.items() for qid in ids],
            root_seed,
            "unsolved",
        ))

        if other is not None:
            diff_rows = []
            for value in usable:
                diff = PassAtK.solved_set_diff(rows, other, value)
                diff_rows += [[value, "newly_solved", qid] for qid in diff.newly_solved]
                diff_rows += [[value, "regressed", qid] for qid in diff.regressed]
                diff_rows += [[value, "still_unsolved", qid] for qid in diff.still_unsolved]
            writer.write("solved_diff.csv", CSVTransformer.to_csv(
                ["k", "status", "question_id"], diff_rows, root_seed, "solved_diff"
            ))

        if true_p is not None:
            streams = SeedStreams(root_seed)
            comparisons = [
                PassAtK.estimator_comparison(true_p, n_samples, value, trials, streams.stream("estimators", value))
                for value in ks
                if value <= n_samples
            ]
            writer.write("estimator_comparison.csv", CSVTransformer.to_csv(
                ["true_p", "n", "k", "trials", "true_pass_at_k", "estimator", "mean", "bias", "variance", "mse"],
                [
                    [cmp.true_p, cmp.n, cmp.k, cmp.trials, cmp.true_pass_at_k, name,
                     stats.mean, stats.bias, stats.variance, stats.mse]
                    for cmp in comparisons
                    for name, stats in (("unbiased", cmp.unbiased), ("naive", cmp.naive))
                ],
                root_seed,
                "estimator_comparison",
            ))
        writer.finish()

    table = Table(title=f"pass@k over {len(rows)} questions")
    table.add_column("k", justify="right")
    table.add_column("unbiased", justify="right")
    table.add_column("naive", justify="right")
    table.add_column("unsolved", justify="right")
    for value, u_mean, n_mean, _, _ in curve:
        count = len(unsolved[value]) if value in unsolved else "-"
        table.add_row(str(value), f"{u_mean:.4f}", f"{n_mean:.4f}", str(count))
    console.print(table)
    console.print(f"[green]✓[/green] Reports written to {out}")


def _with_trials(theory: TheoryConfig, trials: int) -> TheoryConfig:
    """--trials reemplaza el número de ensayos de toda la grilla"""
    return theory.model_copy(update={
        "trials": trials,
        "hint_budget": theory.hint_budget.model_copy(update={"trials": trials}),
        "sqrt_budget": theory.sqrt_budget.model_copy(update={"trials": trials}),
        "upper_bound": theory.upper_bound.model_copy(update={"trials": trials}),
    })


def _row_table(rows: list[ExperimentRow]) -> Table:
    table = Table(title="Learnability checks")
    table.add_column("experiment")
    table.add_column("grid point")
    table.add_column("empirical", justify="right")
    table.add_column("bound", justify="right")
    table.add_column("± CI", justify="right")
    table.add_column("status")
    for row in rows:
        style = STATUS_STYLE[row.status]
        table.add_row(
            row.experiment,
            row.grid_point,
            f"{row.empirical:.4g}",
            f"{row.bound:.4g}",
            f"{row.ci_halfwidth:.3g}",
            f"[{style}]{row.status}[/{style}]",
        )
    return table


@app.command("verify-theory")
def verify_theory(
        config: Path = typer.Option(None, "--config", "-c", envvar="QUESTA_CONFIG", help="Config with a theory section"),
        seed: int = typer.Option(None, "--seed", min=0, envvar="QUESTA_SEED", help="Root seed"),
        out: Path = typer.Option(Path("runs/theory"), "--out", "-o", envvar="QUESTA_OUT", help="Output directory"),
        force: bool = typer.Option(False, "--force", envvar="QUESTA_FORCE", help="Overwrite a non-empty output directory"),
        trials: int = typer.Option(None, "--trials", min=1, envvar="QUESTA_TRIALS", help="Trials for every experiment"),
):
    """
    Run the Monte-Carlo checks of the learnability bounds
    """
    with _handled():
        project = _load_project(config)
        theory = project.theory if trials is None else _with_trials(project.theory, trials)
        writer = _start("verify-theory", project, seed, out, force, {"trials": trials})
        root_seed = writer.config.seed

        rows = TheoryHarness.run_grid(theory, SeedStreams(root_seed))
        writer.write("theory.csv", CSVTransformer.to_csv(
            list(ExperimentRow.model_fields), rows, root_seed, "theory"
        ))
        writer.finish()

    console.print(_row_table(rows))
    statuses = {row.status for row in rows}
    for row in rows:
        if row.status == "inconclusive":
            logger.warning("%s at %s is inconclusive: CI half-width %.3g", row.experiment, row.grid_point, row.ci_halfwidth)
    if "fail" in statuses:
        console.print("[red]✗[/red] Some checks failed")
        raise typer.Exit(1)
    if "refused" in statuses:
        console.print("[red]Error:[/red] Some experiments refused to run")
        raise typer.Exit(2)
    console.print("[green]✓[/green] All checks passed or were inconclusive")


@app.command()
def report(
        target: Path = typer.Argument(..., help="CSV artifact, manifest.json or run directory"),
        limit: int = typer.Option(50, "--limit", "-n", min=1, help="Rows to display"),
):
    """
    Show a CSV artifact as a table or verify the digests of a run
    """
    with _handled():
        if not target.exists():
            raise ConfigError(f"'{target}' not found")
        manifest_path = target / MANIFEST_NAME if target.is_dir() else target
        if manifest_path.name == MANIFEST_NAME:
            manifest = ManifestTransformer.load(manifest_path)
            problems = ManifestTransformer.verify(manifest, manifest_path.parent)
            table = Table(title=f"{manifest.config.get('command', 'run')} (questa-lab {manifest.tool_version})")
            table.add_column("artifact")
            table.add_column("sha256")
            table.add_column("ok")
            broken = {problem.split(":")[0] for problem in problems}
            for entry in manifest.artifacts:
                table.add_row(entry.name, entry.sha256[:16], "[red]✗[/red]" if entry.name in broken else "[green]✓[/green]")
            console.print(table)
            if problems:
                for problem in problems:
                    console.print(f"[red]✗[/red] {problem}")
                raise typer.Exit(1)
            console.print("[green]✓[/green] Every artifact matches its digest")
            return

        columns, rows = CSVTransformer.read_rows(ConfigParser.read_text(target))
        table = Table(title=target.name)
        for column in columns:
            table.add_column(column)
        for row in rows[:limit]:
            table.add_row(*row)
        console.print(table)
        if len(rows) > limit:
            console.print(f"[dim]{len(rows) - limit} more rows[/dim]")


@app.command()
def version():
    """Show version information"""
    console.print(f"[cyan]questa-lab[/cyan] version [green]{__version__}[/green]")


if __name__ == "__main__":
    app()
