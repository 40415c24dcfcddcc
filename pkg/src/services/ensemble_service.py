"""
Ensemble Service
Runs the Monte Carlo ensemble of a config, detects mean-square blow-up,
evaluates the concavity diagnostics and writes CSV, JSON and SVG results.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.core.energy_functionals import DiagnosticsSeries, diagnostics_from_ensemble
from src.core.monte_carlo import EnsembleEstimate, MeanSquareBlowup, detect_mean_square_blowup, run_ensemble
from src.core.noise_models import MultiplicativeNoise, kappa
from src.models.core_models import (
    CommandResult, CriterionReport, EnsembleSummary, ExperimentConfig, SimulationError
)
from src.services.criterion_service import evaluate_criterion
from src.services.experiment_builder import Experiment, build_experiment
from src.utils.export_generator import run_directory, write_csv, write_ensemble_svg, write_json
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import config_hash

logger = setup_logger(__name__)

ENSEMBLE_HEADER = ["time", "v_mean", "v_se", "grad_mean", "lmp1_mean", "blowup_fraction", "paths_alive"]
DIAGNOSTICS_HEADER = ["time", "I", "I_prime", "I_second", "ratio", "concavity_gap", "lower_bound"]


@dataclass
class EnsembleOutcome:
    estimate: EnsembleEstimate
    detection: Optional[MeanSquareBlowup]
    criterion: CriterionReport
    diagnostics: Optional[DiagnosticsSeries]
    summary: EnsembleSummary


def energy_series(experiment: Experiment, estimate: EnsembleEstimate) -> np.ndarray:
    """Ensemble J(t), with the kappa term added for multiplicative noise."""
    params = experiment.params
    J = -0.5 * params.alpha * estimate.g.mean + params.beta / (params.m + 1.0) * estimate.p.mean
    if isinstance(experiment.noise, MultiplicativeNoise):
        J = J + kappa(experiment.noise, experiment.levy) / (params.m + 1.0) * estimate.v.mean
    return J


def concavity_diagnostics(
    experiment: Experiment, estimate: EnsembleEstimate, K: Optional[float]
) -> Optional[DiagnosticsSeries]:
    """Diagnostics on the leading times at which every path is still alive."""
    if K is None:
        return None
    alive = (estimate.counts == estimate.paths) & np.isfinite(estimate.v.mean)
    width = int(np.argmin(alive)) if not np.all(alive) else len(alive)
    steps = np.diff(estimate.times[:width])
    # the horizon entry may close a partial stride
    if steps.size > 1 and not np.isclose(steps[-1], steps[0], rtol=1e-9, atol=0.0):
        width -= 1
    if width < 3:
        logger.warning("Too few uncensored record times for concavity diagnostics")
        return None
    J = energy_series(experiment, estimate)
    return diagnostics_from_ensemble(
        estimate.times[:width],
        estimate.v.mean[:width],
        experiment.params,
        K,
        v_se=estimate.v.se[:width],
        J=J[:width],
    )


class EnsembleService:
    """Service for the ensemble command"""

    def compute(self, config: ExperimentConfig) -> EnsembleOutcome:
        experiment = build_experiment(config)
        estimate = run_ensemble(
            experiment.ensemble_config(), experiment.params, experiment.noise, experiment.levy, experiment.u0
        )
        if estimate.failures:
            first = next(iter(estimate.failures.items()))
            raise RuntimeError(f"{len(estimate.failures)} path(s) failed; path {first[0]}: {first[1]}")
        if estimate.censored_count:
            logger.warning(f"{estimate.censored_count} path(s) censored before the horizon")

        detection = detect_mean_square_blowup(estimate, config.ensemble.ms_threshold)
        report = evaluate_criterion(experiment)
        diagnostics = concavity_diagnostics(experiment, estimate, report.K)

        consistent = None
        if detection is not None and report.tstar_bound is not None:
            consistent = bool(detection.tau_ms <= report.tstar_bound)
            if consistent:
                logger.info(f"tau_ms={detection.tau_ms:.6g} within T* bound {report.tstar_bound:.6g}")
            else:
                logger.warning(
                    f"tau_ms={detection.tau_ms:.6g} exceeds the T* bound {report.tstar_bound:.6g}; needs review"
                )

        summary = EnsembleSummary(
            config_hash=config_hash(config),
            schema_version=config.schema_version,
            paths=estimate.paths,
            horizon=config.ensemble.horizon,
            blowup_count=estimate.blowup_count,
            censored_count=estimate.censored_count,
            tau_ms=detection.tau_ms if detection else None,
            trigger=detection.trigger if detection else None,
            tau_samples=estimate.tau_samples,
            tstar_bound=report.tstar_bound,
            tstar_consistent=consistent,
            ratio_violation_time=diagnostics.ratio_violation_time if diagnostics else None,
        )
        return EnsembleOutcome(estimate, detection, report, diagnostics, summary)

    def run(self, config: ExperimentConfig) -> Tuple[Optional[CommandResult], Optional[SimulationError]]:
        """Run the ensemble and write ensemble.csv, ensemble.json, diagnostics.csv and ensemble.svg."""
        try:
            outcome = self.compute(config)
            estimate, summary = outcome.estimate, outcome.summary
            digest = summary.config_hash
            directory = run_directory(config.output.directory, digest)
            formats = config.output.formats

            files = {}
            rows = [row + (int(count),) for row, count in zip(estimate.rows(), estimate.counts)]
            files["csv"] = str(write_csv(directory / "ensemble.csv", ENSEMBLE_HEADER, rows, digest))
            files["json"] = str(write_json(directory / "ensemble.json", summary, digest))
            if outcome.diagnostics is not None:
                d = outcome.diagnostics
                lower = d.lower_bound if d.lower_bound is not None else [None] * len(d.times)
                files["diagnostics"] = str(write_csv(
                    directory / "diagnostics.csv",
                    DIAGNOSTICS_HEADER,
                    zip(d.times, d.I, d.Iprime, d.Isecond, d.ratio, d.concavity_gap, lower),
                    digest,
                ))
            if "svg" in formats:
                files["svg"] = str(write_ensemble_svg(
                    directory / "ensemble.svg",
                    estimate.times,
                    estimate.v.mean,
                    estimate.v.se,
                    digest,
                    tstar_bound=summary.tstar_bound,
                    tau_ms=summary.tau_ms,
                ))

            table = [["quantity", "value"],
                     ["paths", str(summary.paths)],
                     ["blowups", str(summary.blowup_count)],
                     ["censored", str(summary.censored_count)],
                     ["tau_ms", "none" if summary.tau_ms is None else f"{summary.tau_ms:.6g}"],
                     ["tstar_bound", "none" if summary.tstar_bound is None else f"{summary.tstar_bound:.6g}"]]
            return CommandResult(
                command="ensemble", run_directory=str(directory), files=files, table=table
            ), None

        except ValueError as e:
            logger.error(f"Invalid ensemble input: {str(e)}", exc_info=True)
            return None, SimulationError(type="validation_error", message=str(e))
        except Exception as e:
            logger.error(f"Error running ensemble: {str(e)}", exc_info=True)
            return None, SimulationError(type="runtime_failure", message=str(e))
