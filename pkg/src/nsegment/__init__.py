"""Label-only elastic deformation augmentation for segmentation datasets.

The core idea: instead of warping image and label together, draw a random
smooth displacement field per sample per epoch and apply it to the label
alone, simulating the subtle annotation inconsistencies real datasets
carry. Fields are bounded uniform noise smoothed by a normalized Gaussian
kernel; the (alpha, sigma) pair is sampled from a configurable pool and a
probability gate decides whether a sample is touched at all. Everything is
deterministic given (master_seed, sample_id, epoch).
"""

from .analysis import AreaReport, area_report, connected_components
from .augment import (
    ApplyInfo,
    AugmentConfig,
    DEFAULT_OMEGA_ENCODING,
    OmegaSet,
    SamplePair,
    apply_augmentation,
    apply_augmentation_with_info,
    config_from_options,
    derive_stream,
    flip_horizontal,
    nsegment,
    resize_sample,
    sample_params,
)
from .dataset import (
    ClassMap,
    DatasetManifest,
    PaletteTable,
    TilingSpec,
    load_mask,
    load_pair,
    remap_classes,
    tile_origins,
    tile_pair,
)
from .errors import AugmentationError, DataError, InvalidInputError, InvalidParameterError
from .fields import (
    DeformationParams,
    DisplacementField,
    GaussianKernel,
    build_gaussian_kernel,
    convolve_separable,
    generate_displacement_field,
    kernel_radius,
    round_half_away,
)
from .warp import IGNORE, ImagePlane, LabelMask, WarpSpec, clamp_index, warp_image, warp_label

__version__ = "0.1.0"

__all__ = [
    "AreaReport",
    "area_report",
    "connected_components",
    "ApplyInfo",
    "AugmentConfig",
    "DEFAULT_OMEGA_ENCODING",
    "OmegaSet",
    "SamplePair",
    "apply_augmentation",
    "apply_augmentation_with_info",
    "config_from_options",
    "derive_stream",
    "flip_horizontal",
    "nsegment",
    "resize_sample",
    "sample_params",
    "ClassMap",
    "DatasetManifest",
    "PaletteTable",
    "TilingSpec",
    "load_mask",
    "load_pair",
    "remap_classes",
    "tile_origins",
    "tile_pair",
    "AugmentationError",
    "DataError",
    "InvalidInputError",
    "InvalidParameterError",
    "DeformationParams",
    "DisplacementField",
    "GaussianKernel",
    "build_gaussian_kernel",
    "convolve_separable",
    "generate_displacement_field",
    "kernel_radius",
    "round_half_away",
    "IGNORE",
    "ImagePlane",
    "LabelMask",
    "WarpSpec",
    "clamp_index",
    "warp_image",
    "warp_label",
    "__version__",
]
