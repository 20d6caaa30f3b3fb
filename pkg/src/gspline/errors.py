"""Exception types shared across the package."""


class GSplineError(Exception):
    """Base class for all gspline errors."""


class GroupMismatch(GSplineError):
    """Operands belong to different groups."""


class QuotientHasNoProduct(GSplineError):
    """The 2-sphere is a quotient, not a group: no product or inverse."""


class DimensionMismatch(GSplineError):
    """Vector dimension does not match the group's action dimension."""


class BranchCutSingular(GSplineError):
    """Log requested at (or too close to) the branch cut."""


class UnsupportedDegree(GSplineError):
    """Cardinal B-spline degree outside the supported range 0..3."""


class InvalidSpacing(GSplineError):
    """Uniform grid spacing does not tile the compact group."""


class ChannelMismatch(GSplineError):
    """Channel counts of kernel stack and feature map disagree."""


class ShapeUnderflow(GSplineError):
    """Valid-padding correlation on an input smaller than the kernel."""


class GridMismatch(GSplineError):
    """Feature map and kernel stack were built on different group grids."""


class NotLifted(GSplineError):
    """Operation requires a lifted feature map (with an H axis)."""


class OffGridElement(GSplineError):
    """Group element is not representable on the feature map's H grid."""


class ConfigTypeError(GSplineError):
    """Layer chain in an architecture config is not type-consistent."""

    def __init__(self, layer_index, message):
        super().__init__(f"layer {layer_index}: {message}")
        self.layer_index = layer_index


class CacheMismatch(GSplineError):
    """Backward pass called with a cache from a different forward pass."""


class ShapeMismatch(GSplineError):
    """Prediction and target shapes disagree."""


class DivergenceDetected(GSplineError):
    """Training loss became non-finite."""


class SupportTooLarge(GSplineError):
    """Kernel support exceeds the injectivity radius of Exp."""


class SingularFit(GSplineError):
    """Normal equations are rank-deficient beyond ridge rescue."""


class BadMagic(GSplineError):
    """Tensor file does not start with the expected magic bytes."""


class TruncatedPayload(GSplineError):
    """Tensor file payload is shorter than the header declares."""


class UnsupportedVersion(GSplineError):
    """Tensor file version not understood by this reader."""
