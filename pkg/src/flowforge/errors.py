"""Exception hierarchy for flowforge."""

from __future__ import annotations


class FlowforgeError(Exception):
    """Base class for all flowforge errors."""


class ConfigError(FlowforgeError):
    """Malformed configuration key/value, or a missing required parameter."""


class GraphError(FlowforgeError):
    """A flow graph failed validation and cannot be executed."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"invalid flow graph: {lines}")


class ExecutionError(FlowforgeError):
    """A task or the scheduler failed during flow execution."""


class RegistryError(FlowforgeError):
    """Unknown predicate, action, or reducer name."""
