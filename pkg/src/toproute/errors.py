"""Exception hierarchy shared by the engine and the CLI."""


class RouteError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class InputError(RouteError, ValueError):
    """Malformed map, query, or argument."""

    exit_code = 2


class InfeasibleQueryError(RouteError):
    """No valid route exists for the query (even x -> y breaks the budget)."""

    exit_code = 3


class UnreachableError(RouteError):
    """Two POIs are not connected."""

    exit_code = 3


class CapExceededError(RouteError):
    """A per-query wall-time or memory cap was hit."""

    exit_code = 4
