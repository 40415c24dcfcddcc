"""
Verification Service
Runs the oracle suite for a config: the energy balances on a recorded
ensemble, the martingale checks, the scalar second-moment law (multiplicative
noise) and the Taylor remainder check.
"""
from typing import Optional, Tuple

import numpy as np

from src.core.monte_carlo import run_ensemble
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise
from src.core.verification_oracles import (
    balance_probes, ito_balance_energy, ito_balance_grad, ito_balance_grad_multiplicative,
    ito_balance_l2, ito_balance_lmp1, ito_balance_multiplicative,
    ito_inequality_multiplicative_lmp1, martingale_checks, scalar_second_moment, taylor_check
)
from src.models.core_models import CommandResult, ExperimentConfig, SimulationError, VerificationSummary
from src.services.experiment_builder import Experiment, build_experiment
from src.utils.export_generator import run_directory, write_json
from src.utils.logger import setup_logger
from src.utils.parsers.config_parser import config_hash

logger = setup_logger(__name__)

ADDITIVE_BALANCES = (ito_balance_l2, ito_balance_grad, ito_balance_lmp1, ito_balance_energy)
MULTIPLICATIVE_BALANCES = (
    ito_balance_multiplicative, ito_balance_grad_multiplicative, ito_inequality_multiplicative_lmp1
)
SCALAR_CHECK_TIMES = (0.5, 1.0)


def frozen_noise(experiment: Experiment, horizon: float) -> Optional[AdditiveNoise]:
    """
    Noise acting on the frozen state sin(pi x/L): additive noise as is, and
    multiplicative coefficients sigma*u, eta(z)*u evaluated at that state.
    """
    noise = experiment.noise
    if noise is None or isinstance(noise, AdditiveNoise):
        return noise
    wavenumber = np.pi / experiment.grid.length
    sigma = noise.sigma_const

    def sigma_fn(x, t):
        return sigma * np.sin(wavenumber * x)

    def eta_space(x, t):
        return np.sin(wavenumber * x)

    return AdditiveNoise.separable(sigma_fn, noise.eta_profile, eta_space, decay_horizon=2.0 * horizon)


class VerificationService:
    """Service for the verify command"""

    def compute(self, config: ExperimentConfig) -> VerificationSummary:
        experiment = build_experiment(config)
        block = config.verify
        seed = config.ensemble.master_seed
        dt = experiment.scheme.dt

        probes = balance_probes(experiment.params, experiment.noise, experiment.levy, experiment.grid)
        ensemble = run_ensemble(
            experiment.ensemble_config(paths=block.paths, horizon=block.horizon, keep_records=True),
            experiment.params, experiment.noise, experiment.levy, experiment.u0, probes=probes,
        )
        if ensemble.failures:
            raise RuntimeError(f"{len(ensemble.failures)} path(s) failed during verification")

        oracles = MULTIPLICATIVE_BALANCES if isinstance(experiment.noise, MultiplicativeNoise) else ADDITIVE_BALANCES
        balances = [
            oracle(ensemble, experiment.params, experiment.noise, experiment.levy, dt, experiment.blowup_threshold)
            for oracle in oracles
        ]

        martingales = martingale_checks(
            experiment.levy, frozen_noise(experiment, block.horizon), experiment.grid,
            block.horizon, block.martingale_streams, seed, dt=dt,
        )

        scalar = []
        if isinstance(experiment.noise, MultiplicativeNoise):
            scalar.append(scalar_second_moment(
                experiment.noise.sigma_const, experiment.noise.eta_profile, experiment.levy,
                1.0, SCALAR_CHECK_TIMES, block.scalar_paths, dt, seed,
            ))

        taylor = taylor_check(block.taylor_samples, seed)
        passed = (all(report.passed for report in balances) and martingales.passed
                  and all(report.passed for report in scalar) and taylor.passed)
        return VerificationSummary(
            config_hash=config_hash(config),
            schema_version=config.schema_version,
            balances=balances,
            martingales=martingales,
            scalar_moments=scalar,
            taylor=taylor,
            passed=passed,
        )

    def run(self, config: ExperimentConfig) -> Tuple[Optional[CommandResult], Optional[SimulationError]]:
        """
        Run every oracle and write verify.json. Failed oracles still write the
        report; the error then carries the oracle_failure type.
        """
        try:
            summary = self.compute(config)
            directory = run_directory(config.output.directory, summary.config_hash)
            path = write_json(directory / "verify.json", summary, summary.config_hash)

            table = [["oracle", "result"]]
            table += [[report.identity_name, "pass" if report.passed else "FAIL"] for report in summary.balances]
            table += [[check.name, "pass" if check.passed else "FAIL"] for check in summary.martingales.checks]
            table += [["scalar_second_moment", "pass" if report.passed else "FAIL"] for report in summary.scalar_moments]
            table.append(["taylor_remainder", "pass" if summary.taylor.passed else "FAIL"])

            result = CommandResult(
                command="verify",
                run_directory=str(directory),
                files={"json": str(path)},
                passed=summary.passed,
                table=table,
            )
            if not summary.passed:
                failed = [row[0] for row in table[1:] if row[1] == "FAIL"]
                return result, SimulationError(type="oracle_failure", message=f"failed oracles: {', '.join(failed)}")
            logger.info("All oracles passed")
            return result, None

        except ValueError as e:
            logger.error(f"Invalid verification input: {str(e)}", exc_info=True)
            return None, SimulationError(type="validation_error", message=str(e))
        except Exception as e:
            logger.error(f"Error running oracles: {str(e)}", exc_info=True)
            return None, SimulationError(type="runtime_failure", message=str(e))
