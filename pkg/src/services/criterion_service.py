"""
Criterion Service
Evaluates the blow-up criterion of a config on its initial data and writes
the JSON and Markdown reports.
"""
from typing import Optional, Tuple

from src.core.energy_functionals import criterion_additive, criterion_multiplicative
from src.core.noise_models import MultiplicativeNoise
from src.models.core_models import CommandResult, CriterionReport, ExperimentConfig, SimulationError
from src.services.experiment_builder import Experiment, build_experiment
from src.utils.export_generator import (
    generate_criterion_markdown, run_directory, write_json, write_text
)
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import config_hash

logger = setup_logger(__name__)


def evaluate_criterion(experiment: Experiment) -> CriterionReport:
    """Additive or multiplicative criterion, following the noise family of the experiment."""
    block = experiment.config.criterion
    evaluate = criterion_multiplicative if isinstance(experiment.noise, MultiplicativeNoise) else criterion_additive
    return evaluate(
        experiment.u0,
        experiment.params,
        experiment.noise,
        experiment.grid,
        experiment.levy,
        K=block.K,
        use_continuum_eigenvalue=block.use_continuum_eigenvalue,
    )


def criterion_table(report: CriterionReport) -> list:
    rows = [["quantity", "value"]]
    rows.append(["verdict", report.verdict])
    rows.append(["lhs", "n/a" if report.lhs is None else f"{report.lhs:.6g}"])
    rows.append(["v0", f"{report.v0:.6g}"])
    rows.append(["lambda_1", f"{report.lambda_1:.6g}"])
    if report.kappa is not None:
        rows.append(["kappa", f"{report.kappa:.6g}"])
    if report.K is not None:
        rows.append(["K", f"{report.K:.6g}"])
        rows.append(["tstar_bound", f"{report.tstar_bound:.6g}"])
    return rows


class CriterionService:
    """Service for the criterion command"""

    def run(self, config: ExperimentConfig) -> Tuple[Optional[CommandResult], Optional[SimulationError]]:
        """
        Evaluate the criterion and write criterion.json (and criterion.md).

        Returns:
            Tuple containing either CommandResult or SimulationError; a criterion
            that cannot be evaluated still writes its report and returns not_evaluable.
        """
        try:
            experiment = build_experiment(config)
            report = evaluate_criterion(experiment)
            digest = config_hash(config)
            directory = run_directory(config.output.directory, digest)

            files = {"json": str(write_json(directory / "criterion.json", report, digest))}
            if "md" in config.output.formats:
                markdown = generate_criterion_markdown(report, digest)
                files["md"] = str(write_text(directory / "criterion.md", markdown))

            logger.info(f"Criterion ({report.mode}): {report.verdict}, lhs={report.lhs}")
            result = CommandResult(
                command="criterion",
                run_directory=str(directory),
                files=files,
                table=criterion_table(report),
            )
            if report.verdict == "not-evaluable":
                return result, SimulationError(type="not_evaluable", message=report.message or "criterion not evaluable")
            return result, None

        except ValueError as e:
            logger.error(f"Invalid criterion input: {str(e)}", exc_info=True)
            return None, SimulationError(type="validation_error", message=str(e))
        except Exception as e:
            logger.error(f"Error evaluating criterion: {str(e)}", exc_info=True)
            return None, SimulationError(type="runtime_failure", message=str(e))
