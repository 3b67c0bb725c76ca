"""Exception types raised across the simulator."""


class ConfigurationError(ValueError):
    """Invalid user-supplied parameters."""


class ConsistencyError(RuntimeError):
    """An internal invariant failed after a computation that should guarantee it."""


class SamplingError(ValueError):
    """Sample rate or window length incompatible with the waveform period."""


class IntegrationError(RuntimeError):
    """The fixed-step rectifier integrator produced a non-finite or non-physical state."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class TrialError(RuntimeError):
    """Wraps a module error with the stream index that triggered it."""

    def __init__(self, stream_index: int, cause: Exception):
        super().__init__(f"stream {stream_index}: {type(cause).__name__}: {cause}")
        self.stream_index = stream_index
        self.cause = cause
