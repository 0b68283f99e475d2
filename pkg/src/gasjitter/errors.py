"""Exception hierarchy shared by all gasjitter modules."""


class GasJitterError(Exception):
    """Base class for every error raised by this package."""


class NetworkParseError(GasJitterError):
    """Malformed network or scenario document."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NetworkReferenceError(GasJitterError):
    """A pipe or compressor refers to an undeclared object."""

    def __init__(self, name, kind="node", line=None):
        self.name = name
        self.kind = kind
        self.line = line
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown {kind} '{name}'{loc}")


class DomainError(GasJitterError, ValueError):
    """Inputs outside the domain of an operation (unbalanced, cyclic, ...)."""


class InfeasibleError(GasJitterError):
    """No physical stationary solution exists for the requested setting."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message)


class BoundError(GasJitterError):
    """A pressure bound is exceeded by a dispatch decision."""


class OrientationError(GasJitterError):
    """Flow through a compressor runs against its boosting direction."""


class NonConvergenceError(GasJitterError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class SimulationError(GasJitterError):
    """Transient integration blew up (non-positive pressure)."""

    def __init__(self, message, location=None, time=None):
        self.location = location
        self.time = time
        super().__init__(message)
