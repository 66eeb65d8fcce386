class VanetSimError(Exception):
    """Base class for every error the simulator reports to its user."""


class NetworkFormatError(VanetSimError, ValueError):
    def __init__(self, message, source="<string>", line=None):
        self.source = source
        self.line = line
        location = source if line is None else f"{source}:{line}"
        super().__init__(f"{location}: {message}")


class ConfigError(VanetSimError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


class ScenarioError(VanetSimError, ValueError):
    pass


class TraceFormatError(VanetSimError, ValueError):
    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"trace line {line_number}: {message}")


class MetricsError(VanetSimError, ValueError):
    pass


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock. Always a simulator bug."""
