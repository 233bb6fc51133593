"""Kink-kink dynamics in the phi^6 model."""

from .field_core import (
    DomainError,
    FieldPair,
    Grid,
    MovingKink,
    Orientation,
    U,
    dU,
    ddU,
    g_correction,
    kink_eval,
    kink_pair_state,
    lorentz_gamma,
    potential_derivative,
    profile,
    resolve_k1,
    separation,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "FieldPair", "Grid", "MovingKink", "Orientation", "U", "dU", "ddU",
    "g_correction", "kink_eval", "kink_pair_state", "lorentz_gamma", "potential_derivative",
    "profile", "resolve_k1", "separation", "__version__",
]
