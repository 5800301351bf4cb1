from speechconf.features.functionals import (
    EGEMAPS_LITE_88,
    FeatureLayout,
    apply_functionals,
)
from speechconf.features.llds import FrameConfig, LLDSeries, compute_llds
from speechconf.features.vector import (
    DISFLUENCY_NAMES,
    PROSODIC_DIM,
    STORE_HEADER,
    TOTAL_DIM,
    FeatureVector,
    Normalizer,
    assemble_feature_vector,
    ingest_external_features,
    normalizer_apply,
    normalizer_fit,
    read_feature_store,
    write_feature_store,
)

__all__ = [
    "EGEMAPS_LITE_88",
    "FeatureLayout",
    "apply_functionals",
    "FrameConfig",
    "LLDSeries",
    "compute_llds",
    "DISFLUENCY_NAMES",
    "PROSODIC_DIM",
    "STORE_HEADER",
    "TOTAL_DIM",
    "FeatureVector",
    "Normalizer",
    "assemble_feature_vector",
    "ingest_external_features",
    "normalizer_apply",
    "normalizer_fit",
    "read_feature_store",
    "write_feature_store",
]
