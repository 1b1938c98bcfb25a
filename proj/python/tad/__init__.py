"""Trust-aware dataset distillation under noisy labels."""

from ._tad import (
    GmmFit,
    TrustPartition,
    __version__,
    class_thresholds,
    confidences,
    default_config,
    evaluate_synthetic,
    fit_gmm2,
    inject_noise,
    make_blobs,
    partition,
    run_experiment,
)

__all__ = [
    "GmmFit",
    "TrustPartition",
    "__version__",
    "class_thresholds",
    "confidences",
    "default_config",
    "evaluate_synthetic",
    "fit_gmm2",
    "inject_noise",
    "make_blobs",
    "partition",
    "run_experiment",
]
