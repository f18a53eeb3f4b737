"""Lorentz-model hyperbolic geometry, entailment cones and early-exit triggering."""

from ._hypee import (
    cone_membership,
    curvature_estimate,
    delta_hyperbolicity,
    entailment_loss_pair,
    exp_map_origin,
    exterior_angle,
    gaussian_pdf,
    generate_synthetic,
    geodesic_distance,
    half_aperture,
    hyperbolic_kmeans,
    lift,
    log_map_origin,
    lorentz_inner,
    macs_saved_fraction,
    mixture_macs_saved,
    read_embeddings,
    scale_then_lift,
    spatial_norm,
    write_embeddings,
    HypeeIoError,
    HypeeNumericError,
)

__all__ = [
    "cone_membership",
    "curvature_estimate",
    "delta_hyperbolicity",
    "entailment_loss_pair",
    "exp_map_origin",
    "exterior_angle",
    "gaussian_pdf",
    "generate_synthetic",
    "geodesic_distance",
    "half_aperture",
    "hyperbolic_kmeans",
    "lift",
    "log_map_origin",
    "lorentz_inner",
    "macs_saved_fraction",
    "mixture_macs_saved",
    "read_embeddings",
    "scale_then_lift",
    "spatial_norm",
    "write_embeddings",
    "HypeeIoError",
    "HypeeNumericError",
]
