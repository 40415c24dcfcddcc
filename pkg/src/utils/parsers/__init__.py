# Parsers package
# Experiment config loading and validation

from .config_parser import (
    ConfigError,
    apply_overrides,
    config_hash,
    load_config,
    parse_config
)

__all__ = [
    'ConfigError',
    'apply_overrides',
    'config_hash',
    'load_config',
    'parse_config'
]
