"""Removes rain streaks from a single image by sparse coding over paired rain and non-rain dictionaries."""

from .derain import (DerainConfig, DerainResult, correlation_matrix, derain,
                     derain_with_map, shrink_codes)
from .dictionary import (Dictionary, DictionaryFormatError, DictionarySet, ksvd,
                         ksvd_train, load_dictionary, save_dictionary)
from .evaluation import (RainOverlay, extract_rain_overlay, psnr, ssim,
                         synthesize_rain)
from .images import (Image, ImageIOError, RainMask, load_image, load_mask,
                     save_image, save_map, save_mask)
from .omp import OmpStop, SparseCode, omp, omp_batch, reconstruct, split_code
from .patches import (PatchGrid, SamplingError, extract_patches, patch_average,
                      sample_training_patches)
from .shrinkmap import MapParams, adaptive_epsilon, shrinkage_map

__version__ = "0.1.0"

__all__ = [
    "DerainConfig", "DerainResult", "correlation_matrix", "derain", "derain_with_map",
    "shrink_codes", "Dictionary", "DictionaryFormatError", "DictionarySet", "ksvd",
    "ksvd_train", "load_dictionary", "save_dictionary", "RainOverlay",
    "extract_rain_overlay", "psnr", "ssim", "synthesize_rain", "Image", "ImageIOError",
    "RainMask", "load_image", "load_mask", "save_image", "save_map", "save_mask",
    "OmpStop", "SparseCode", "omp", "omp_batch", "reconstruct", "split_code",
    "PatchGrid", "SamplingError", "extract_patches", "patch_average",
    "sample_training_patches", "MapParams", "adaptive_epsilon", "shrinkage_map",
]
