"""Exception types. The CLI maps each family to an exit code."""


class PolyFKError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(PolyFKError, ValueError):
    """Rejected input: degenerate domain, bad configuration, malformed file."""

    exit_code = 2


class MeshParseError(InputError):
    """Syntax error in a mesh or field file; carries the 1-based line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(InputError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"[{key}] {message}" if key else message)


class TopologyError(PolyFKError, ValueError):
    """Inverted, self-intersecting or non-manifold mesh entity."""

    exit_code = 3

    def __init__(self, message, element=None):
        self.element = element
        super().__init__(message)


class SolverError(PolyFKError, RuntimeError):
    """Linear solve failed; ``step`` is the time-step index."""

    exit_code = 4

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


class ContractError(PolyFKError, ValueError):
    """A caller violated a documented precondition."""
