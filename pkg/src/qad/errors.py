"""Exception hierarchy shared by all qad modules."""


class QADError(Exception):
    """Base class. The engine sets ``node``/``node_label`` when a node fails."""

    node = None
    node_label = None

    def __str__(self):
        msg = super().__str__()
        if self.node_label is not None:
            msg = f"{msg} [at node {self.node_label}]"
        return msg


class FormatError(QADError, ValueError):
    pass


class FixedPointOverflowError(QADError, OverflowError):
    def __init__(self, x, lo, hi, what="value"):
        self.x = x
        self.range = (lo, hi)
        super().__init__(f"{what} {x} outside representable range [{lo}, {hi}]")


class DomainError(QADError, ValueError):
    pass


class ParseError(QADError, ValueError):
    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(sorted(expected))
        exp = f"; expected one of {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at position {position}{exp}")


class ResetRequiredError(QADError):
    pass


class WidthError(QADError, ValueError):
    pass


class AncillaExhaustedError(QADError):
    def __init__(self, needed, available, what="ancilla qubits"):
        self.needed = needed
        self.available = available
        super().__init__(f"need {needed} {what}, only {available} available")


class SingularityWarning(UserWarning):
    pass
