"""Radial two-phase melting simulator with a surface-tension interface condition.

The free boundary is constructed by a particle method: first-passage statistics
of a 3D Bessel process against trial boundaries drive a monotone fixed-point
iteration, with a minimal-jump rule resolving instantaneous melting. A
finite-difference front-tracking solver provides an independent cross-check,
and a diagnostics suite verifies the regularity and inequality properties the
solution is expected to satisfy.
"""

from meltfront.core import (
    Boundary,
    InitialData,
    PiecewiseProfile,
    Segment,
    TemperatureField,
    nu_integral,
    sample_from_profile,
    temperature_to_w,
    validate_initial_data,
    w_to_temperature,
)

__all__ = [
    "Boundary",
    "InitialData",
    "PiecewiseProfile",
    "Segment",
    "TemperatureField",
    "nu_integral",
    "sample_from_profile",
    "temperature_to_w",
    "validate_initial_data",
    "w_to_temperature",
]

__version__ = "0.1.0"
