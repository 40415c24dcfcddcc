import json

import numpy as np
import pytest

from src.models.core_models import CriterionComponents, CriterionReport, SweepCell
from src.utils.export_generator import (
    format_table, generate_criterion_markdown, metadata_line, render_json, run_directory,
    write_csv, write_ensemble_svg, write_json
)


@pytest.fixture
def predicted_report():
    return CriterionReport(
        mode="additive",
        components=CriterionComponents(gradient_term=-88.8, nonlinear_term=121.5, noise_term=-0.1),
        lhs=32.6,
        verdict="blow-up-predicted",
        hypotheses_ok=True,
        lambda_1=9.8696,
        v0=18.0,
        epsilon=0.5,
        delta=1.0 / 6.0,
        K_min=4.34,
        K=4.34,
        tstar_bound=1.45,
    )


class TestWriters:
    """Test the CSV and JSON writers."""

    def test_run_directory_created(self, tmp_path):
        """Test that the run directory is keyed by the config hash."""
        path = run_directory(tmp_path / "runs", "abc123")

        assert path.is_dir()
        assert path.name == "abc123"

    def test_csv_layout(self, tmp_path):
        """Test metadata line, header and cell formatting."""
        path = write_csv(tmp_path / "t.csv", ["time", "value", "flag"], [(0.1, None, True), (1, 2.5, False)], "abc")
        lines = path.read_text(encoding="utf-8").splitlines()

        assert lines[0] == metadata_line("abc")
        assert lines[0] == "# config_hash=abc,schema_version=1"
        assert lines[1] == "time,value,flag"
        assert lines[2] == "0.1,,true"
        assert lines[3] == "1,2.5,false"

    def test_csv_floats_round_trip(self, tmp_path):
        """Test that floats are written with full precision."""
        value = 1.0 / 3.0
        path = write_csv(tmp_path / "t.csv", ["x"], [(value,)], "abc")

        assert float(path.read_text(encoding="utf-8").splitlines()[2]) == value

    def test_json_header_fields_first(self):
        """Test that the config hash and schema version lead the document."""
        document = json.loads(render_json(SweepCell(amplitude=2.0), "abc"))

        assert list(document)[:2] == ["config_hash", "schema_version"]
        assert document["amplitude"] == 2.0

    def test_json_non_finite_become_null(self, tmp_path):
        """Test that inf and nan are written as null."""
        path = write_json(tmp_path / "r.json", {"a": float("inf"), "b": [np.nan, 1.0], "c": np.int64(3)}, "abc")
        document = json.loads(path.read_text(encoding="utf-8"))

        assert document["a"] is None
        assert document["b"] == [None, 1.0]
        assert document["c"] == 3


class TestEnsembleSvg:
    """Test the ensemble figure."""

    def test_svg_is_deterministic(self, tmp_path):
        """Test that identical inputs give identical bytes."""
        times = np.linspace(0.0, 1.0, 11)
        mean = np.exp(times)
        se = 0.1 * np.ones_like(times)
        first = write_ensemble_svg(tmp_path / "a.svg", times, mean, se, "abc", tstar_bound=1.5, tau_ms=0.8)
        second = write_ensemble_svg(tmp_path / "b.svg", times, mean, se, "abc", tstar_bound=1.5, tau_ms=0.8)

        assert first.read_bytes() == second.read_bytes()
        assert b"config_hash=abc" in first.read_bytes()

    def test_svg_with_censored_tail(self, tmp_path):
        """Test that missing means after blow-up are tolerated."""
        times = np.linspace(0.0, 1.0, 5)
        mean = np.array([1.0, 2.0, 5.0, np.nan, np.nan])
        se = np.array([0.0, 0.1, 0.2, np.nan, np.nan])

        path = write_ensemble_svg(tmp_path / "c.svg", times, mean, se, "abc")

        assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")


class TestCriterionMarkdown:
    """Test the Markdown criterion report."""

    def test_sections(self, predicted_report):
        """Test that the report carries verdict, components and bound."""
        markdown = generate_criterion_markdown(predicted_report, "abc")

        assert markdown.startswith("# Blow-up criterion (additive noise)")
        assert "**Verdict:** blow-up-predicted" in markdown
        assert "## Components" in markdown
        assert "## Constants" in markdown
        assert "T* <= K / (delta v0) = 1.45" in markdown
        assert "config_hash=abc" in markdown

    def test_no_bound(self, predicted_report):
        """Test the report when no K is available."""
        report = predicted_report.model_copy(update={"lhs": -1.0, "verdict": "not-predicted", "K": None,
                                                      "K_min": None, "tstar_bound": None})

        markdown = generate_criterion_markdown(report, "abc")

        assert "No bound" in markdown

    def test_multiplicative_rows(self, predicted_report):
        """Test that multiplicative reports show the kappa window."""
        report = predicted_report.model_copy(update={"mode": "multiplicative", "kappa": 4.9,
                                                      "kappa_window_ok": True, "kappa_margin": 4.9})

        markdown = generate_criterion_markdown(report, "abc")

        assert "kappa/(m+1)" in markdown
        assert "window 0 <= kappa <= alpha*lambda_1: yes" in markdown


class TestFormatTable:
    """Test the plain-text table."""

    def test_alignment(self):
        """Test that columns are padded and the header underlined."""
        table = format_table([["quantity", "value"], ["lhs", "32.6"]])
        lines = table.splitlines()

        assert lines[0] == "quantity  value"
        assert lines[1] == "--------  -----"
        assert lines[2] == "lhs       32.6"

    def test_empty(self):
        """Test the empty table."""
        assert format_table([]) == ""
