"""Python access to the ncpd change-point detection core."""

from ._core import (
    DynamicNetwork,
    NcpdError,
    adjusted_f1,
    baseline_statistic,
    calibrate_threshold,
    detect_online,
    generate_sequence,
    load_network,
    localisation_error,
    localize,
    run_cli,
    save_network,
    selfsup_change_points,
    similarity_statistic,
    windowed_correlations,
)

__all__ = [
    "DynamicNetwork",
    "NcpdError",
    "adjusted_f1",
    "baseline_statistic",
    "calibrate_threshold",
    "detect_online",
    "generate_sequence",
    "load_network",
    "localisation_error",
    "localize",
    "run_cli",
    "save_network",
    "selfsup_change_points",
    "similarity_statistic",
    "windowed_correlations",
]
