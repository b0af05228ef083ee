"""Python bindings for the gdrift library."""

from ._gdrift import (
    DriftConfig,
    coordinate,
    drift_field,
    drift_loss,
    energy_distance,
    extract_features,
    gram_matrix,
    pairwise_distances,
    phantom_pair,
    radial_power_spectrum,
    resolve_config,
    run_transport,
    solve_simplex_qp,
    transport_drift_defaults,
    two_objective_closed_form,
)

__all__ = [
    "DriftConfig",
    "coordinate",
    "drift_field",
    "drift_loss",
    "energy_distance",
    "extract_features",
    "gram_matrix",
    "pairwise_distances",
    "phantom_pair",
    "radial_power_spectrum",
    "resolve_config",
    "run_transport",
    "solve_simplex_qp",
    "transport_drift_defaults",
    "two_objective_closed_form",
]
