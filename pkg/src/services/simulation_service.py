"""
Simulation Service
Integrates a single path (path index 0 of the master seed) and writes its
cadlag norm record.
"""
from typing import Optional, Tuple

from src.core.levy_noise import path_stream
from src.core.spde_integrator import TrajectoryRecord, simulate_path
from src.models.core_models import CommandResult, ExperimentConfig, SimulationError
from src.services.experiment_builder import build_experiment
from src.utils.export_generator import run_directory, write_csv
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import config_hash

logger = setup_logger(__name__)

TRAJECTORY_HEADER = ["time", "l2_squared", "grad_squared", "lmp1_power", "entry"]


class SimulationService:
    """Service for the simulate command"""

    def simulate(self, config: ExperimentConfig) -> TrajectoryRecord:
        experiment = build_experiment(config)
        return simulate_path(
            experiment.params,
            experiment.noise,
            experiment.levy,
            experiment.u0,
            experiment.scheme,
            config.ensemble.horizon,
            experiment.blowup_threshold,
            path_stream(config.ensemble.master_seed, 0),
        )

    def run(self, config: ExperimentConfig) -> Tuple[Optional[CommandResult], Optional[SimulationError]]:
        """
        Simulate one path and write trajectory.csv.

        The entry column is 0 for grid times, 1 and 2 for the pre- and
        post-jump values at a jump time and 3 for the blow-up entry.
        """
        try:
            record = self.simulate(config)
            digest = config_hash(config)
            directory = run_directory(config.output.directory, digest)
            path = write_csv(directory / "trajectory.csv", TRAJECTORY_HEADER, record.rows(), digest)

            table = [["quantity", "value"],
                     ["entries", str(len(record.times))],
                     ["jumps", str(len(record.jump_log))]]
            if record.blowup.detected:
                logger.info(f"Path blew up at t={record.blowup.tau:.6g} ({record.blowup.cause})")
                table.append(["tau", f"{record.blowup.tau:.6g}"])
                table.append(["cause", record.blowup.cause])
            else:
                table.append(["final_l2_squared", f"{record.l2sq[-1]:.6g}"])

            return CommandResult(
                command="simulate",
                run_directory=str(directory),
                files={"csv": str(path)},
                table=table,
            ), None

        except ValueError as e:
            logger.error(f"Invalid simulation input: {str(e)}", exc_info=True)
            return None, SimulationError(type="validation_error", message=str(e))
        except Exception as e:
            logger.error(f"Error simulating path: {str(e)}", exc_info=True)
            return None, SimulationError(type="runtime_failure", message=str(e))
