import pytest

from src.utils.cli.error_handlers import (
    DEFAULT_ERROR_EXIT_CODE, ERROR_EXIT_CODE_MAP, create_error, exit_code_for, get_exit_code_for_error_type
)


class TestExitCodes:
    """Test the error type to exit code mapping."""

    @pytest.mark.parametrize("error_type,code", [
        ("validation_error", 1),
        ("not_evaluable", 1),
        ("oracle_failure", 2),
        ("runtime_failure", 3),
    ])
    def test_mapped_types(self, error_type, code):
        """Test every mapped error type."""
        assert get_exit_code_for_error_type(error_type) == code
        assert ERROR_EXIT_CODE_MAP[error_type] == code

    def test_unknown_type(self):
        """Test that unknown types fall back to the default code."""
        assert get_exit_code_for_error_type("unexpected") == DEFAULT_ERROR_EXIT_CODE

    def test_success(self):
        """Test that no error means exit status 0."""
        assert exit_code_for(None) == 0

    def test_error_object(self, sample_oracle_failure):
        """Test that an error object maps through its type."""
        assert exit_code_for(sample_oracle_failure) == 2

    def test_create_error(self):
        """Test creating a standardized error."""
        error = create_error("runtime_failure", "solver failed")

        assert error.type == "runtime_failure"
        assert error.message == "solver failed"
