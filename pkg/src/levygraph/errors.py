class LevyGraphError(Exception):
    """Base class; ``category`` is the machine-readable tag the CLI reports."""

    category = "runtime"
