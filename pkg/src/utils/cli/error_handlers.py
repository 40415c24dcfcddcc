from typing import Optional

from src.models.core_models import SimulationError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

# Error type to process exit code mapping
ERROR_EXIT_CODE_MAP = {
    "validation_error": 1,
    "not_evaluable": 1,
    "oracle_failure": 2,
    "runtime_failure": 3,
}

SUCCESS_EXIT_CODE = 0
DEFAULT_ERROR_EXIT_CODE = 3


def get_exit_code_for_error_type(error_type: str) -> int:
    """Get the process exit code for an error type."""
    return ERROR_EXIT_CODE_MAP.get(error_type, DEFAULT_ERROR_EXIT_CODE)


def exit_code_for(error: Optional[SimulationError]) -> int:
    """0 without an error, otherwise the mapped code; the error is reported on the way."""
    if error is None:
        return SUCCESS_EXIT_CODE
    code = get_exit_code_for_error_type(error.type)
    logger.error(f"{error.type}: {error.message}")
    return code


def create_error(error_type: str, message: str) -> SimulationError:
    """Create a standardized service error."""
    return SimulationError(type=error_type, message=message)
