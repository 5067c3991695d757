"""Exception and warning types shared across the package."""


class CamWeightError(Exception):
    """Base class for errors raised by this package."""


class ShapeMismatchError(CamWeightError, ValueError):
    """Operands have incompatible dimensions."""


class DegenerateLookAtError(CamWeightError, ValueError):
    """Look-at construction is undefined (eye == center, or up parallel to gaze)."""


class DegenerateWeightsError(CamWeightError, ValueError):
    """All intermediate weights are zero; normalization is undefined."""


class DegenerateRigError(CamWeightError, ValueError):
    """Rig geometry makes a weighting scheme undefined."""


class ImageTooSmallError(CamWeightError, ValueError):
    """Image is smaller than the metric's window."""


class ExhaustedSamplingError(CamWeightError, RuntimeError):
    """Rejection sampling hit its attempt cap without an accepted draw."""


class DivergedTrainingError(CamWeightError, RuntimeError):
    """Training loss became non-finite."""


class DegenerateRigWarning(UserWarning):
    """A weighting scheme fell back to uniform weights on a degenerate rig."""
