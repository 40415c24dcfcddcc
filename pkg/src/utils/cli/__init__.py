# Command-line helpers for the experiment commands
