"""Exception types shared across the package."""


class BrokerScaleError(Exception):
    """Base class for all package errors."""


class ConfigError(BrokerScaleError, ValueError):
    """A parameter set violates one of the model's inequalities.

    The message names the violated inequality.
    """


class DomainError(BrokerScaleError, ValueError):
    """An argument lies outside the domain of a curve quantity."""


class UnreachableDemandError(DomainError):
    """Zero served demand requested on a curve with no finite cut-off price."""


class InstanceTooLarge(BrokerScaleError):
    """Instance exceeds the state budget of an exact oracle."""


class TraceFormatError(BrokerScaleError, ValueError):
    """Malformed trace or ledger file; message carries the line number."""
