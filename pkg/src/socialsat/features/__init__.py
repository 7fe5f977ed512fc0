"""Three interchangeable per-channel feature engines and the feature matrix."""

from .canonical import extract_canonical22
from .fourier import fft, ifft
from .matrix import ENGINES, FeatureCatalog, FeatureMatrix, build_feature_matrix
from .spectral import extract_spectral_stat
from .zones import ZoneConfig, assign_zones, extract_zone_features, load_zone_config

__all__ = [
    "ENGINES",
    "FeatureCatalog",
    "FeatureMatrix",
    "ZoneConfig",
    "assign_zones",
    "build_feature_matrix",
    "extract_canonical22",
    "extract_spectral_stat",
    "extract_zone_features",
    "fft",
    "ifft",
    "load_zone_config",
]
