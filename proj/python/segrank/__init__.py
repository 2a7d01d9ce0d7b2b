"""Multi-class 3D segmentation evaluation, ranking, and stability toolkit."""

from segrank._core import (
    SegrankError,
    bootstrap_ranking,
    challenge_ranking,
    dsc,
    evaluate_case,
    gwet_ac,
    hausdorff,
    hausdorff_percentile,
    holm_adjust,
    kendall_tau,
    metric_ranking,
    read_nifti,
    run_pipeline,
    volume_similarity,
    wilcoxon_one_sided,
    write_nifti,
)

__all__ = [
    "SegrankError",
    "bootstrap_ranking",
    "challenge_ranking",
    "dsc",
    "evaluate_case",
    "gwet_ac",
    "hausdorff",
    "hausdorff_percentile",
    "holm_adjust",
    "kendall_tau",
    "metric_ranking",
    "read_nifti",
    "run_pipeline",
    "volume_similarity",
    "wilcoxon_one_sided",
    "write_nifti",
]
