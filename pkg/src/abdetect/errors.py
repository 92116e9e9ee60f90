"""Exception types shared across the toolkit.

Kept in one place so the CLI can map them onto exit codes without
importing every module.
"""


class ToolkitError(Exception):
    """Base class for all abdetect-specific failures."""


class RecordFormatError(ToolkitError):
    """A cohort CSV file is missing, malformed, or violates record invariants."""


class SolverError(ToolkitError):
    """A linear-algebra kernel hit a singular or non-finite system."""


class TrainingError(ToolkitError):
    """Model training could not complete (degenerate split, stall, diverged loss)."""


class NoPositivesError(ToolkitError):
    """A scored set contains no positive instances, so recall-based metrics are undefined."""
