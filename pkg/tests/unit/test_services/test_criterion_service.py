import json
from pathlib import Path

import pytest

from src.models.core_models import CriterionComponents, CriterionReport
from src.services.criterion_service import CriterionService, criterion_table, evaluate_criterion
from src.services.experiment_builder import build_experiment


class TestEvaluateCriterion:
    """Test criterion dispatch on the noise family."""

    def test_additive_without_noise(self, make_config):
        """Test the deterministic criterion of a large sine."""
        report = evaluate_criterion(build_experiment(make_config(initial__amplitude=6.0)))

        assert report.mode == "additive"
        assert report.verdict == "blow-up-predicted"

    def test_multiplicative(self, make_config):
        """Test that multiplicative noise selects the kappa criterion."""
        config = make_config(noise={"kind": "multiplicative", "sigma": 1.0})

        report = evaluate_criterion(build_experiment(config))

        assert report.mode == "multiplicative"
        assert report.kappa == pytest.approx(0.5)

    def test_K_from_config(self, make_config):
        """Test that a configured K replaces K_min."""
        report = evaluate_criterion(build_experiment(make_config(initial__amplitude=6.0, criterion={"K": 50.0})))

        assert report.K == 50.0


class TestCriterionService:
    """Test the CriterionService class."""

    def test_run_writes_reports(self, make_config):
        """Test that the criterion writes JSON and Markdown."""
        result, error = CriterionService().run(make_config(initial__amplitude=6.0))

        assert error is None
        assert set(result.files) == {"json", "md"}
        document = json.loads(Path(result.files["json"]).read_text(encoding="utf-8"))
        assert document["verdict"] == "blow-up-predicted"
        assert document["schema_version"] == 1
        assert Path(result.files["md"]).read_text(encoding="utf-8").startswith("# Blow-up criterion")
        assert ["verdict", "blow-up-predicted"] in result.table

    def test_markdown_optional(self, make_config, tmp_path):
        """Test that Markdown is skipped when not requested."""
        config = make_config(output={"directory": str(tmp_path / "runs"), "formats": ["json"]})

        result, error = CriterionService().run(config)

        assert error is None
        assert set(result.files) == {"json"}

    def test_not_evaluable(self, make_config, mocker):
        """Test that an unevaluable criterion still reports and flags not_evaluable."""
        report = CriterionReport(
            mode="additive",
            components=CriterionComponents(gradient_term=-1.0, nonlinear_term=1.0),
            lhs=None,
            verdict="not-evaluable",
            hypotheses_ok=True,
            lambda_1=9.87,
            v0=0.5,
            epsilon=0.5,
            delta=1.0 / 6.0,
            message="quadrature did not converge",
        )
        mocker.patch("src.services.criterion_service.evaluate_criterion", return_value=report)

        result, error = CriterionService().run(make_config())

        assert result is not None
        assert error.type == "not_evaluable"
        assert error.message == "quadrature did not converge"

    def test_validation_error(self, make_config, mocker):
        """Test that a ValueError maps to validation_error."""
        mocker.patch("src.services.criterion_service.build_experiment", side_effect=ValueError("bad grid"))

        result, error = CriterionService().run(make_config())

        assert result is None
        assert error.type == "validation_error"
        assert error.message == "bad grid"

    def test_runtime_failure(self, make_config, mocker):
        """Test that other exceptions map to runtime_failure."""
        mocker.patch("src.services.criterion_service.build_experiment", side_effect=RuntimeError("boom"))

        result, error = CriterionService().run(make_config())

        assert result is None
        assert error.type == "runtime_failure"

    def test_table_without_bound(self, make_config):
        """Test the printed table when no bound exists."""
        rows = criterion_table(evaluate_criterion(build_experiment(make_config())))

        assert rows[0] == ["quantity", "value"]
        assert not any(row[0] == "tstar_bound" for row in rows)
