import json
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from src.services.ensemble_service import (
    DIAGNOSTICS_HEADER, ENSEMBLE_HEADER, EnsembleService, energy_series
)
from src.services.experiment_builder import build_experiment


@pytest.fixture
def blowup_config(make_config):
    return make_config(
        initial__amplitude=6.0,
        grid__n=50,
        scheme__dt=1e-4,
        ensemble__paths=2,
        ensemble__ms_threshold=1e20,
    )


class TestEnergySeries:
    """Test the ensemble energy functional."""

    def _estimate(self):
        ones = np.ones(3)
        return SimpleNamespace(
            v=SimpleNamespace(mean=2.0 * ones),
            g=SimpleNamespace(mean=4.0 * ones),
            p=SimpleNamespace(mean=8.0 * ones),
        )

    def test_additive(self, make_config):
        """Test J = -(alpha/2) grad + beta/(m+1) lmp1."""
        J = energy_series(build_experiment(make_config()), self._estimate())

        assert np.allclose(J, -2.0 + 2.0)

    def test_multiplicative_adds_kappa_term(self, make_config):
        """Test that multiplicative noise adds kappa/(m+1) v."""
        experiment = build_experiment(make_config(noise={"kind": "multiplicative", "sigma": 2.0}))

        J = energy_series(experiment, self._estimate())

        assert np.allclose(J, 0.0 + 2.0 / 4.0 * 2.0)


class TestEnsembleService:
    """Test the EnsembleService class."""

    def test_quiet_ensemble(self, make_config):
        """Test a decaying ensemble: no detection and no diagnostics."""
        outcome = EnsembleService().compute(make_config())

        assert outcome.detection is None
        assert outcome.diagnostics is None
        assert outcome.summary.blowup_count == 0
        assert outcome.summary.tau_ms is None
        assert outcome.criterion.verdict == "not-predicted"

    def test_blowup_consistent_with_bound(self, blowup_config):
        """Test that the detected blow-up lies below the T* bound."""
        outcome = EnsembleService().compute(blowup_config)

        assert outcome.summary.blowup_count == 2
        assert outcome.summary.trigger == "blowup_fraction"
        assert outcome.summary.tau_ms < outcome.summary.tstar_bound
        assert outcome.summary.tstar_consistent is True
        assert outcome.diagnostics is not None
        assert outcome.diagnostics.times[-1] < outcome.summary.tau_ms

    def test_ratio_nondecreasing_with_minimal_K(self, blowup_config):
        """Test that I'/I^(1+delta) never decreases on a simulated c=6 ensemble at K = K_min."""
        outcome = EnsembleService().compute(blowup_config)
        diagnostics = outcome.diagnostics

        assert outcome.criterion.K == pytest.approx(outcome.criterion.K_min)
        assert diagnostics.K == pytest.approx(outcome.criterion.K_min)
        assert diagnostics.ratio_violation_time is None
        assert diagnostics.ratio_monotone
        ratio = diagnostics.ratio
        assert np.all(np.diff(ratio) >= -1e-6 * np.abs(ratio[:-1]))
        assert outcome.summary.tau_ms <= outcome.summary.tstar_bound

    def test_run_writes_files(self, blowup_config):
        """Test the ensemble output files."""
        result, error = EnsembleService().run(blowup_config)

        assert error is None
        assert set(result.files) == {"csv", "json", "diagnostics", "svg"}
        lines = Path(result.files["csv"]).read_text(encoding="utf-8").splitlines()
        assert lines[1] == ",".join(ENSEMBLE_HEADER)
        assert lines[-1].endswith(",0")
        diagnostics = Path(result.files["diagnostics"]).read_text(encoding="utf-8").splitlines()
        assert diagnostics[1] == ",".join(DIAGNOSTICS_HEADER)
        summary = json.loads(Path(result.files["json"]).read_text(encoding="utf-8"))
        assert summary["paths"] == 2
        assert len(summary["tau_samples"]) == 2

    def test_path_failure_is_runtime_failure(self, make_config, mocker):
        """Test that a failed path fails the command."""
        mocker.patch("src.core.monte_carlo.simulate_path", side_effect=RuntimeError("solve failed"))

        result, error = EnsembleService().run(make_config())

        assert result is None
        assert error.type == "runtime_failure"
        assert "path(s) failed" in error.message
