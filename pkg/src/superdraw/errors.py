"""Error taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies rather than bare ValueError.
"""


class ConfigError(Exception):
    """Invalid or inconsistent configuration (bad strategy kind, shapes, budgets)."""


class DataError(Exception):
    """Malformed or out-of-range input data (CSV parsing, table ranges, lengths)."""


class NumericError(Exception):
    """Non-finite values or numerical failure inside a computation."""
