"""
Export Generator Utilities
Writers for the run directory: CSV tables, JSON summaries, the SVG of the
ensemble mean with its confidence band, and the Markdown criterion report.
Every file carries the config hash and schema version.
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from src.config.settings import settings  # noqa: E402
from src.models.core_models import CriterionReport  # noqa: E402


def run_directory(base: Union[str, Path], config_hash: str) -> Path:
    """<base>/<config hash>, created if missing."""
    path = Path(base) / config_hash
    path.mkdir(parents=True, exist_ok=True)
    return path


def metadata_line(config_hash: str) -> str:
    return f"# config_hash={config_hash},schema_version={settings.SCHEMA_VERSION}"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], config_hash: str) -> Path:
    """Comma-separated UTF-8 with a metadata comment line above the mandatory header row."""
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(metadata_line(config_hash) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def _finite(value: Any) -> Any:
    """JSON has no inf or nan; they become null."""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_json(payload: Union[BaseModel, Dict[str, Any]], config_hash: str) -> str:
    body = payload.model_dump(mode="python") if isinstance(payload, BaseModel) else dict(payload)
    document = {"config_hash": config_hash, "schema_version": settings.SCHEMA_VERSION}
    document.update({key: value for key, value in body.items() if key not in document})
    return json.dumps(_finite(document), indent=2, allow_nan=False) + "\n"


def write_json(path: Path, payload: Union[BaseModel, Dict[str, Any]], config_hash: str) -> Path:
    path.write_text(render_json(payload, config_hash), encoding="utf-8")
    return path


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def write_ensemble_svg(
    path: Path,
    times: np.ndarray,
    mean: np.ndarray,
    se: np.ndarray,
    config_hash: str,
    tstar_bound: Optional[float] = None,
    tau_ms: Optional[float] = None,
) -> Path:
    """Mean of |u(t)|^2 with a 95% band, plus the T* bound and detected tau when known."""
    z = settings.CONFIDENCE_Z
    valid = np.isfinite(mean)
    lower = np.where(valid, mean - z * np.nan_to_num(se), np.nan)
    upper = np.where(valid, mean + z * np.nan_to_num(se), np.nan)

    with plt.rc_context({"svg.hashsalt": config_hash, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        ax.fill_between(times, lower, upper, color="tab:blue", alpha=0.25, linewidth=0, label="95% band")
        ax.plot(times, mean, color="tab:blue", linewidth=1.5, label="E|u(t)|^2")
        if tstar_bound is not None and math.isfinite(tstar_bound) and tstar_bound <= 2.0 * times[-1]:
            ax.axvline(tstar_bound, color="tab:red", linestyle="--", linewidth=1.0, label="T* bound")
        if tau_ms is not None:
            ax.axvline(tau_ms, color="black", linestyle=":", linewidth=1.0, label="tau_ms")
        positive = mean[valid] > 0
        if positive.size and np.all(positive):
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("v(t)")
        ax.set_title(f"config {config_hash}")
        ax.legend(loc="upper left", fontsize="small")
        fig.tight_layout()
        fig.savefig(
            path,
            format="svg",
            metadata={
                "Date": None,
                "Description": metadata_line(config_hash).lstrip("# "),
            },
        )
        plt.close(fig)
    return path


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return f"{value:.6g}"


def generate_criterion_markdown(report: CriterionReport, config_hash: str) -> str:
    """
    Markdown rendering of a criterion report.

    Args:
        report: Evaluated criterion
        config_hash: Hash of the config it was evaluated for

    Returns:
        str: Markdown document
    """
    lines = []

    lines.append(f"# Blow-up criterion ({report.mode} noise)")
    lines.append("")
    lines.append(f"<!-- {metadata_line(config_hash).lstrip('# ')} -->")
    lines.append("")
    lines.append(f"**Verdict:** {report.verdict}")
    if report.message:
        lines.append(f"*{report.message}*")
    lines.append("")

    lines.append("## Components")
    lines.append("| term | value |")
    lines.append("|---|---|")
    lines.append(f"| -(alpha/2) \\|grad u0\\|^2 | {_fmt(report.components.gradient_term)} |")
    lines.append(f"| beta/(m+1) \\|u0\\|_(m+1)^(m+1) | {_fmt(report.components.nonlinear_term)} |")
    if report.mode == "additive":
        lines.append(f"| -(alpha/2) G (noise gradient energy) | {_fmt(report.components.noise_term)} |")
    else:
        lines.append(f"| kappa/(m+1) \\|u0\\|^2 | {_fmt(report.components.kappa_term)} |")
    lines.append(f"| **left-hand side** | **{_fmt(report.lhs)}** |")
    lines.append("")

    lines.append("## Constants")
    lines.append(f"- hypotheses (alpha, beta > 0, m > 1) hold: {_fmt(report.hypotheses_ok)}")
    lines.append(f"- lambda_1: {_fmt(report.lambda_1)}")
    lines.append(f"- v0 = |u0|^2: {_fmt(report.v0)}")
    lines.append(f"- epsilon: {_fmt(report.epsilon)}, delta: {_fmt(report.delta)}")
    if report.mode == "additive":
        lines.append(f"- noise flat energy limit S_inf: {_fmt(report.flat_energy_limit)}")
    else:
        lines.append(f"- kappa: {_fmt(report.kappa)} (window 0 <= kappa <= alpha*lambda_1: "
                     f"{_fmt(report.kappa_window_ok)}, margin {_fmt(report.kappa_margin)})")
    lines.append("")

    lines.append("## Blow-up time bound")
    if report.K is None:
        lines.append("*No bound: the criterion value is not positive.*")
    else:
        lines.append(f"- K_min: {_fmt(report.K_min)}")
        lines.append(f"- K used: {_fmt(report.K)}")
        lines.append(f"- T* <= K / (delta v0) = {_fmt(report.tstar_bound)}")
    lines.append("")

    return "\n".join(lines)


def format_table(rows: List[List[str]]) -> str:
    """Left-aligned plain-text table; the first row is the header."""
    if not rows:
        return ""
    widths = [max(len(row[i]) for row in rows if i < len(row)) for i in range(len(rows[0]))]
    rendered = []
    for index, row in enumerate(rows):
        rendered.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if index == 0:
            rendered.append("  ".join("-" * width for width in widths))
    return "\n".join(rendered)
