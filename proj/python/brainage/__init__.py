"""Python bindings for the brainage C++ library."""

from ._brainage import (
    BrainageError,
    StageError,
    band_powers,
    exact_shapley,
    extract,
    families,
    higuchi_fd,
    hurst_exponent,
    predict,
    preprocess,
    psd_regression,
    read_features,
    render,
    run,
    spearman,
    spectral_entropy,
    summarize,
    synth,
    train,
)

__all__ = [
    "BrainageError",
    "StageError",
    "band_powers",
    "exact_shapley",
    "extract",
    "families",
    "higuchi_fd",
    "hurst_exponent",
    "predict",
    "preprocess",
    "psd_regression",
    "read_features",
    "render",
    "run",
    "spearman",
    "spectral_entropy",
    "summarize",
    "synth",
    "train",
]
