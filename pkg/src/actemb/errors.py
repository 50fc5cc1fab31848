"""Exception types mapped to CLI exit codes (1 config, 2 data, 3 numeric)."""


class ConfigError(Exception):
    """Bad usage, unknown option, or malformed configuration."""


class DataError(Exception):
    """Dataset file missing, malformed, or internally inconsistent."""


class NumericError(Exception):
    """Numerical failure: divergence, non-finite gradients, gradcheck failure."""
