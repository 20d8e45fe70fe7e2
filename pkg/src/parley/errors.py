"""Exception types shared across the package."""


class ParleyError(Exception):
    """Base class for package errors."""


class ScenarioFormatError(ParleyError):
    """A scenario document violates the schema; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownPartyError(ParleyError, KeyError):
    """Lookup of a party id that does not exist in the scenario."""


class DealValidationError(ParleyError, ValueError):
    """A deal is dimensionally or index-wise invalid for a scenario."""


class CapacityError(ParleyError):
    """The hypothesis space exceeds the configured memory budget."""


class SignalValidationError(ParleyError, ValueError):
    """A signal references targets that do not exist or are malformed."""


class NumericalBeliefError(ParleyError):
    """A belief update produced a non-finite value; carries the hypothesis index."""

    def __init__(self, hypothesis_index: int, message: str = ""):
        self.hypothesis_index = hypothesis_index
        detail = f" ({message})" if message else ""
        super().__init__(
            f"non-finite belief value at hypothesis index {hypothesis_index}{detail}"
        )


class ExtractionError(ParleyError):
    """An extractor response could not be parsed; carries the raw payload."""

    def __init__(self, message: str, payload=None):
        self.payload = payload
        super().__init__(message)


class ExtractionTransportError(ParleyError):
    """The extraction endpoint stayed unreachable after retries."""


class PolicyError(ParleyError):
    """An agent policy failed to produce a valid proposal; aborts the trial."""


class ConfigurationError(ParleyError, ValueError):
    """An experiment configuration is invalid; names the offending field."""
