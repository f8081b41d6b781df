"""Detector state machines, one observation at a time."""

from .cusum import CusumState, cusum_step, generalized_cusum_step
from .data_efficient import (
    DeShiryaevState,
    FractionalShiryaevState,
    de_shiryaev_step,
    fractional_shiryaev_step,
)
from .glr import (
    GlrGaussianState,
    MixtureGaussianState,
    default_epsilon,
    default_window,
    glr_gaussian_step,
    mixture_gaussian_step,
)
from .roberts import SrState, sr_step
from .shiryaev import (
    ShiryaevLambdaState,
    ShiryaevRState,
    ShiryaevState,
    shiryaev_step,
    shiryaev_step_lambda,
    shiryaev_step_r,
)
from .specs import (
    Cusum,
    DeShiryaev,
    DetectorSpec,
    FractionalShiryaev,
    GlrGaussian,
    MixtureGaussian,
    Shiryaev,
    ShiryaevRoberts,
)
from .streams import ConstantDriftStream, GaussianAR1Stream, IidLlrStream, LlrStream

__all__ = [
    "ConstantDriftStream",
    "Cusum",
    "CusumState",
    "DeShiryaev",
    "DeShiryaevState",
    "DetectorSpec",
    "FractionalShiryaev",
    "FractionalShiryaevState",
    "GaussianAR1Stream",
    "GlrGaussian",
    "GlrGaussianState",
    "IidLlrStream",
    "LlrStream",
    "MixtureGaussian",
    "MixtureGaussianState",
    "Shiryaev",
    "ShiryaevLambdaState",
    "ShiryaevRState",
    "ShiryaevRoberts",
    "ShiryaevState",
    "SrState",
    "cusum_step",
    "de_shiryaev_step",
    "default_epsilon",
    "default_window",
    "fractional_shiryaev_step",
    "generalized_cusum_step",
    "glr_gaussian_step",
    "mixture_gaussian_step",
    "shiryaev_step",
    "shiryaev_step_lambda",
    "shiryaev_step_r",
    "sr_step",
]
