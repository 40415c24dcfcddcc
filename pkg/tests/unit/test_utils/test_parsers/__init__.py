# Test parsers package
# Tests for experiment config loading
