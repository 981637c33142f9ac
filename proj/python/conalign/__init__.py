"""Alignment of symmetric connectivity densities on [0,1], the sphere and a pair of spheres.

Densities are square matrices over the nodes of a domain named by a string:
``"interval:n"``, ``"sphere:G"`` or ``"dual:G"``.
"""

from ._core import (
    DiffeomorphismError,
    DomainError,
    Error,
    IoError,
    ValidationError,
    act,
    domain_weights,
    harmonic_divergences,
    icosphere,
    invert_warp,
    q_map,
    register_pair,
    riemannian_distance,
    run_table1,
    set_max_threads,
    simulate_population,
    simulate_warp_1d,
    template,
    warp_distance,
)

__all__ = [
    "DiffeomorphismError",
    "DomainError",
    "Error",
    "IoError",
    "ValidationError",
    "act",
    "domain_weights",
    "harmonic_divergences",
    "icosphere",
    "invert_warp",
    "q_map",
    "register_pair",
    "riemannian_distance",
    "run_table1",
    "set_max_threads",
    "simulate_population",
    "simulate_warp_1d",
    "template",
    "warp_distance",
]
