"""Exception types shared across the package."""


class TruncationTooSmall(ValueError):
    """Coherent-state tail mass beyond the Fock cutoff exceeds the tolerance."""


class NonPhysicalState(ValueError):
    """A density matrix violates Hermiticity, unit trace or positivity."""


class UnsupportedInitialState(TypeError):
    """The coherent-branch backend only evolves atomic-superposition x coherent inputs."""


class StepUnderflow(RuntimeError):
    """The adaptive integrator cannot meet its tolerance at the minimum step size."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration.

    Carries the offending key and, when parsed from a file, the line number.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if key is not None:
            prefix += f"key '{key}'"
        if line is not None:
            prefix += f" (line {line})"
        super().__init__(f"{prefix}: {message}" if prefix else message)
