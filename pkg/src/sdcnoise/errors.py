"""Exception hierarchy shared across the package.

All domain failures derive from :class:`DomainError` so that the CLI can map
them uniformly to exit code 2, keeping exit code 1 for usage problems.
"""


class DomainError(Exception):
    """Base class for all domain-level failures."""


class ProgrammeError(DomainError):
    """Invalid table programme or microdata (schema violation, bad reference).

    ``location`` points at the offending element, e.g. ``tables[2].breakdowns[1]``.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class InfeasibleError(DomainError):
    """Requested parameters lie outside the feasible region."""
