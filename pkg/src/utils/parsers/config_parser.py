"""
Experiment config loading: TOML text in, a validated ExperimentConfig out,
or a ConfigError listing every violation with its dotted location.
"""
import copy
import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, Union

from pydantic import BaseModel, ValidationError

from src.config.settings import settings
from src.models.core_models import ExperimentConfig
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

_HASH_EXCLUDE = {"ensemble": {"threads"}, "output": True}


class ConfigError(ValueError):
    """Invalid experiment config; carries all violations, not just the first."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("Invalid configuration:\n  " + "\n  ".join(self.violations))


def _block_model(annotation: Any) -> Optional[Type[BaseModel]]:
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    return None


def _unknown_keys(raw: Dict[str, Any], model: Type[BaseModel], prefix: str = "") -> List[str]:
    found = []
    for key, value in raw.items():
        location = f"{prefix}{key}"
        if key not in model.model_fields:
            found.append(location)
            continue
        nested = _block_model(model.model_fields[key].annotation)
        if nested is not None and isinstance(value, dict):
            found.extend(_unknown_keys(value, nested, prefix=f"{location}."))
    return found


def _drop(raw: Dict[str, Any], location: str) -> None:
    *parents, leaf = location.split(".")
    target = raw
    for parent in parents:
        target = target[parent]
    target.pop(leaf, None)


def _format_error(error: Dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error["loc"]) or "<root>"
    message = error["msg"]
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    return f"{location}: {message}"


def _cross_checks(config: ExperimentConfig) -> List[str]:
    """Checks that need more than one block or the preset registry."""
    # Imported here; the builder depends on the numerical core.
    from src.core.presets import PresetRegistry
    from src.services.experiment_builder import build_levy, build_noise

    violations = []
    if config.initial.preset not in PresetRegistry.names("initial"):
        violations.append(
            f"initial.preset: unknown preset '{config.initial.preset}' "
            f"(known: {', '.join(PresetRegistry.names('initial'))})"
        )

    noise = config.noise
    if noise.kind == "additive":
        if noise.preset not in PresetRegistry.names("additive"):
            violations.append(f"noise.preset: unknown additive preset '{noise.preset}'")
        if noise.decay_horizon is None:
            violations.append("noise.decay_horizon: additive noise must declare a decay horizon")
    if noise.kind == "multiplicative" and noise.eta_profile not in PresetRegistry.names("eta_profile"):
        violations.append(f"noise.eta_profile: unknown jump profile '{noise.eta_profile}'")

    try:
        levy = build_levy(config.levy)
    except ValueError as exc:
        violations.append(f"levy: {exc}")
        return violations

    if not violations:
        try:
            build_noise(config.noise, levy, config.grid.length)
        except ValueError as exc:
            location = "noise.eta_profile" if noise.kind == "multiplicative" else "noise"
            violations.append(f"{location}: {exc}")
    return violations


def parse_config(raw: Dict[str, Any], strict: bool = False, source: str = "<config>") -> ExperimentConfig:
    """Validate a decoded config mapping, collecting every violation."""
    raw = copy.deepcopy(raw)
    violations: List[str] = []

    version = raw.get("schema_version")
    if version is None:
        violations.append("schema_version: required (this release reads schema_version = "
                          f"{settings.SCHEMA_VERSION})")
    elif version != settings.SCHEMA_VERSION:
        violations.append(
            f"schema_version: version {version} is not supported; this release reads version "
            f"{settings.SCHEMA_VERSION}. Migrate by renaming changed keys and setting "
            f"schema_version = {settings.SCHEMA_VERSION}"
        )

    unknown = _unknown_keys(raw, ExperimentConfig)
    if unknown and strict:
        violations.extend(f"{location}: unknown key" for location in unknown)
    else:
        for location in unknown:
            logger.warning(f"{source}: ignoring unknown key '{location}'")
            _drop(raw, location)

    config = None
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        violations.extend(
            _format_error(error) for error in exc.errors()
            if error["loc"] != ("schema_version",) or version is not None
        )

    if config is not None and not violations:
        violations.extend(_cross_checks(config))
    if violations:
        raise ConfigError(violations)
    return config


def load_config(path: Union[str, Path], strict: bool = False) -> ExperimentConfig:
    """Read and validate a TOML experiment config."""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError([f"{path}: file not found"])
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: not valid TOML ({exc})"])
    config = parse_config(raw, strict=strict, source=str(path))
    logger.info(f"Loaded config {path} (hash {config_hash(config)})")
    return config


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 prefix of the canonical JSON dump, ignoring thread count and output settings."""
    payload = config.model_dump(mode="json", exclude=_HASH_EXCLUDE)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:settings.CONFIG_HASH_LENGTH]


def apply_overrides(
    config: ExperimentConfig,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> ExperimentConfig:
    """Command-line overrides for output directory, master seed and thread count."""
    ensemble = config.ensemble.model_copy(update={
        key: value for key, value in (("master_seed", seed), ("threads", threads)) if value is not None
    })
    output = config.output.model_copy(update={"directory": out} if out is not None else {})
    updated = config.model_copy(update={"ensemble": ensemble, "output": output})
    return ExperimentConfig.model_validate(updated.model_dump())
