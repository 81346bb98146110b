"""Exception hierarchy.

The CLI maps :class:`InputError` subclasses to exit code 1 and
:class:`EstimationError` subclasses to exit code 2.
"""


class AmscaleError(Exception):
    pass


class InputError(AmscaleError, ValueError):
    pass


class ParseError(InputError):
    pass


class EmptyInput(InputError):
    pass


class ConfigError(InputError):
    pass


class DegenerateVariance(InputError):
    """A vector with zero variance where a correlation or slope needs spread."""


class ZeroWeight(InputError):
    pass


class InsufficientPlacements(InputError):
    pass


class EmptyStimulusColumn(InputError):
    pass


class EstimationError(AmscaleError):
    pass


class NoValidRespondents(EstimationError):
    pass


class SingularRespondent(EstimationError):
    pass


class InsufficientRows(EstimationError):
    pass


class NotIdentified(EstimationError):
    pass


class TooFewStimuli(NotIdentified):
    pass


class AmbiguousPolarity(EstimationError):
    pass


class BootstrapDegenerate(EstimationError):
    pass


class NonConvergence(RuntimeWarning):
    """Issued (not raised) when ALS hits its iteration cap."""
