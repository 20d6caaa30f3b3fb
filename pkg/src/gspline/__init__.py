"""B-spline group-equivariant convolutional layers for R^d x| H.

Groups (SO2, ScalePos, SO3, the 2-sphere quotient), analytic B-spline
kernels, lifting/group correlation and projection layers with manual
gradients, a config-driven network composer, synthetic training tasks,
and a numerical verification harness.
"""

from .errors import GSplineError
from .groups import (
    SO2,
    SO3,
    AffineElement,
    GroupElement,
    LieAlgebraVector,
    ScalePos,
    Sphere2,
    Trans,
    affine_inverse,
    affine_product,
    get_group,
)
from .layers import (
    FeatureMap,
    SampledKernelStack,
    apply_representation,
    group_correlate,
    lift_correlate,
    project_h,
    sample_transformed_kernels,
)
from .learning import (
    SyntheticDataset,
    load_checkpoint,
    loss_eval,
    make_synthetic_dataset,
    save_checkpoint,
    sgd_train,
)
from .network import Network
from .splines import (
    GroupGrid,
    SplineKernel,
    build_h_grid,
    build_repulsion_grid,
    build_spatial_centers,
    cardinal_bspline,
    cardinal_bspline_1d,
)
from .tensorio import load_tensor, save_tensor
from .verification import VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "AffineElement",
    "FeatureMap",
    "GSplineError",
    "GroupElement",
    "GroupGrid",
    "LieAlgebraVector",
    "Network",
    "SO2",
    "SO3",
    "SampledKernelStack",
    "ScalePos",
    "Sphere2",
    "SplineKernel",
    "SyntheticDataset",
    "Trans",
    "VerificationReport",
    "affine_inverse",
    "affine_product",
    "apply_representation",
    "build_h_grid",
    "build_repulsion_grid",
    "build_spatial_centers",
    "cardinal_bspline",
    "cardinal_bspline_1d",
    "get_group",
    "group_correlate",
    "lift_correlate",
    "load_checkpoint",
    "load_tensor",
    "loss_eval",
    "make_synthetic_dataset",
    "project_h",
    "run_suite",
    "sample_transformed_kernels",
    "save_checkpoint",
    "save_tensor",
    "sgd_train",
]
