"""Exception taxonomy shared across the package.

Domain violations (nonpositive weights, malformed vectors) raise plain
ValueError so they behave like numpy's own input checks.  Configuration
problems and solver failures get dedicated types so the command line can
map them to distinct exit codes.
"""


class ConfigError(Exception):
    """Invalid or unreadable run configuration (CLI exit code 2)."""


class SolverError(RuntimeError):
    """Numerical failure the driver cannot recover from (CLI exit code 3)."""


class SubproblemError(SolverError):
    """A penalty subproblem failed to converge after retries."""
