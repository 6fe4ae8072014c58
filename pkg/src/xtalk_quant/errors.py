"""Exception types shared across the package."""


class XtalkError(Exception):
    """Base class for all xtalk-quant errors."""


class InvalidParams(XtalkError):
    """A parameter is non-finite, out of range, or inconsistent."""


class InvalidBudget(XtalkError):
    """A link-budget field is unusable (bad PSD shape, nonpositive noise, ...)."""


class DominanceViolation(XtalkError):
    """A synthesized channel exceeded the configured row-dominance ceiling."""


class ParseError(XtalkError):
    """A channel or config file could not be parsed.

    Carries the offending tone index (or -1 for header-level problems).
    """

    def __init__(self, message: str, tone: int = -1):
        super().__init__(message)
        self.tone = tone


class SingularDiagonal(XtalkError):
    """A channel matrix has a zero diagonal entry."""

    def __init__(self, message: str, tone: int = -1):
        super().__init__(message)
        self.tone = tone


class InsufficientData(XtalkError):
    """Not enough tones/points to perform a fit."""


class SingularChannel(XtalkError):
    """A linear system involving the channel is numerically singular."""

    def __init__(self, message: str, freq: float = float("nan")):
        super().__init__(message)
        self.freq = freq


class RangeError(XtalkError):
    """A precoder entry lies outside the unit box assumed by the quantizer."""


class NumericalError(XtalkError):
    """An internal consistency check failed (should never happen on finite input)."""


class RelativeLossUndefined(XtalkError):
    """Relative loss requested for a user whose ideal rate is zero.

    The absolute loss is still available on the exception.
    """

    def __init__(self, message: str, absolute_loss: float = float("nan")):
        super().__init__(message)
        self.absolute_loss = absolute_loss


class BoundInapplicable(XtalkError):
    """A closed-form bound was evaluated outside its validity region."""


class BitDepthTooSmall(XtalkError):
    """Word length below the admissibility floor of the per-tone bound.

    ``min_bits`` is the smallest admissible (real-valued) word length.
    """

    def __init__(self, message: str, min_bits: float):
        super().__init__(message)
        self.min_bits = min_bits


class FloorNonpositive(XtalkError):
    """The closed-form spectral-efficiency floor is nonpositive.

    Relative-loss bounds built on the floor are inapplicable in this regime.
    """


class TargetUnreachable(XtalkError):
    """No word length within the searched range meets the requested target."""
