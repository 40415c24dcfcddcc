"""
Sweep Service
Phase table over initial amplitude and noise strength (noise scale or kappa):
the criterion verdict of every cell next to the blow-up actually observed.
"""
import itertools
from typing import List, Optional, Tuple

from src.core.monte_carlo import detect_mean_square_blowup, run_ensemble
from src.models.core_models import CommandResult, ExperimentConfig, SimulationError, SweepCell, SweepTable
from src.services.criterion_service import evaluate_criterion
from src.services.experiment_builder import Experiment, build_experiment
from src.utils.export_generator import run_directory, write_csv, write_json
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import config_hash

logger = setup_logger(__name__)

SWEEP_HEADER = ["amplitude", "noise_scale", "kappa", "lhs", "verdict", "blowup_fraction", "tau_ms", "error"]


def sweep_axes(config: ExperimentConfig) -> List[Tuple[float, Optional[float], Optional[float]]]:
    """Cartesian product of the configured axes; raises ValueError on an empty or conflicting axis spec."""
    block = config.sweep
    if not block.amplitudes:
        raise ValueError("sweep.amplitudes: the amplitude axis is empty")
    if block.noise_scales and block.kappas:
        raise ValueError("sweep: choose either noise_scales or kappas as the noise axis, not both")
    if block.kappas and config.noise.kind != "multiplicative":
        raise ValueError("sweep.kappas: a kappa axis needs multiplicative noise")
    if block.noise_scales and config.noise.kind == "none":
        raise ValueError("sweep.noise_scales: a noise-scale axis needs a noise block")
    scales = block.noise_scales or [None]
    kappas = block.kappas or [None]
    return list(itertools.product(block.amplitudes, scales, kappas))


class SweepService:
    """Service for the sweep command"""

    def _cell(
        self, base: Experiment, amplitude: float, scale: Optional[float], kappa_value: Optional[float]
    ) -> SweepCell:
        cell = SweepCell(amplitude=amplitude, noise_scale=scale, kappa=kappa_value)
        try:
            experiment = base.with_amplitude(amplitude)
            if scale is not None:
                experiment = experiment.with_noise_scale(scale)
            if kappa_value is not None:
                experiment = experiment.with_kappa(kappa_value)

            report = evaluate_criterion(experiment)
            cell.lhs = report.lhs
            cell.verdict = report.verdict

            if base.config.sweep.simulate:
                estimate = run_ensemble(
                    experiment.ensemble_config(), experiment.params, experiment.noise,
                    experiment.levy, experiment.u0,
                )
                if estimate.failures:
                    raise RuntimeError(f"{len(estimate.failures)} path(s) failed")
                detection = detect_mean_square_blowup(estimate, base.config.ensemble.ms_threshold)
                cell.blowup_fraction = float(estimate.blowup_fraction[-1])
                cell.tau_ms = detection.tau_ms if detection else None
        except Exception as e:
            logger.warning(f"Sweep cell (c={amplitude}, scale={scale}, kappa={kappa_value}) failed: {str(e)}")
            cell.error = str(e)
        return cell

    def compute(self, config: ExperimentConfig) -> SweepTable:
        axes = sweep_axes(config)
        base = build_experiment(config)
        logger.info(f"Sweeping {len(axes)} cell(s)")
        cells = [self._cell(base, amplitude, scale, kappa_value) for amplitude, scale, kappa_value in axes]
        failed = sum(cell.error is not None for cell in cells)
        if failed:
            logger.warning(f"{failed}/{len(cells)} sweep cell(s) recorded an error")
        return SweepTable(config_hash=config_hash(config), schema_version=config.schema_version, cells=cells)

    def run(self, config: ExperimentConfig) -> Tuple[Optional[CommandResult], Optional[SimulationError]]:
        """Sweep and write sweep.csv and sweep.json; failing cells are recorded, not fatal."""
        try:
            table = self.compute(config)
            digest = table.config_hash
            directory = run_directory(config.output.directory, digest)
            rows = [
                (c.amplitude, c.noise_scale, c.kappa, c.lhs, c.verdict, c.blowup_fraction, c.tau_ms, c.error)
                for c in table.cells
            ]
            files = {
                "csv": str(write_csv(directory / "sweep.csv", SWEEP_HEADER, rows, digest)),
                "json": str(write_json(directory / "sweep.json", table, digest)),
            }

            printed = [["amplitude", "noise", "verdict", "blowup_fraction", "tau_ms"]]
            for c in table.cells:
                noise = c.kappa if c.kappa is not None else c.noise_scale
                printed.append([
                    f"{c.amplitude:g}",
                    "-" if noise is None else f"{noise:g}",
                    c.verdict or f"error: {c.error}",
                    "-" if c.blowup_fraction is None else f"{c.blowup_fraction:.3f}",
                    "-" if c.tau_ms is None else f"{c.tau_ms:.6g}",
                ])
            return CommandResult(command="sweep", run_directory=str(directory), files=files, table=printed), None

        except ValueError as e:
            logger.error(f"Invalid sweep: {str(e)}", exc_info=True)
            return None, SimulationError(type="validation_error", message=str(e))
        except Exception as e:
            logger.error(f"Error running sweep: {str(e)}", exc_info=True)
            return None, SimulationError(type="runtime_failure", message=str(e))
