"""Failure modes surfaced by the solvers and IO layers."""


class ConfigError(ValueError):
    """Bad configuration text or constraint violation."""


class StepSizeError(RuntimeError):
    """Advective CFL bound violated for the requested dt."""


class RemapScheduleError(RuntimeError):
    """Remap invoked off the exact remap schedule."""


class BlowupError(RuntimeError):
    """Solution lost finiteness (consumed by the harness as transition)."""


class CheckpointError(IOError):
    """Corrupt, truncated or mismatched checkpoint file."""


class NumericalIntegrationError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class BracketError(RuntimeError):
    """Amplitude bracket could not be established within budget."""
