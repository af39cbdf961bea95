"""Exception and warning types shared across the package."""


class VidromError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(VidromError):
    """A media file or container could not be decoded."""


class ShapeError(VidromError):
    """Array or frame dimensions are inconsistent with what an operation needs."""


class BoundsError(VidromError):
    """A region or index falls outside the valid support."""


class InputError(VidromError):
    """Input data violates a precondition (length, count, value range)."""


class MatchError(VidromError):
    """Template matching could not produce any valid placement."""


class TrackingLostError(VidromError):
    """No acceptable match was found for a frame."""

    def __init__(self, frame_index, message=None):
        self.frame_index = frame_index
        super().__init__(message or f"tracking lost at frame {frame_index}")


class DegenerateDataError(VidromError):
    """Data lacks the rank or variability required by a fit."""


class ConditioningError(VidromError):
    """A regression problem is rank deficient or numerically singular."""


class FitError(VidromError):
    """An optimisation failed to converge or exceeded its error budget."""


class NormalizationError(VidromError):
    """A quantity needed as a normalizer is zero or undefined."""


class DivergenceError(VidromError):
    """A trajectory left the configured divergence bound during integration."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"trajectory diverged at t = {time:.6g}")


class ConfigError(VidromError):
    """A configuration file is malformed or inconsistent."""


class ExtrapolationWarning(UserWarning):
    """A model is being evaluated outside the amplitude range it was trained on."""


class EmbeddingWarning(UserWarning):
    """The delay embedding may be too small for the declared manifold dimension."""
