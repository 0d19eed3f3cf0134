"""Shared exception base for data, graph, and model errors."""


class ToolkitError(Exception):
    """Base class for every error raised on bad data, graphs, or models.

    The CLI maps any ToolkitError to exit status 2 and prints the concrete
    class name, so subclasses keep stable, descriptive names.
    """
