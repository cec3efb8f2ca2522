"""Beamforming and beam-nulling over MIMO Rayleigh channels.

Capacity and bit-error-rate simulation of eigen-beamforming, beam-nulling
and their multi-dimensional variants, optionally concatenated with linear
dispersion codes or orthogonal designs.
"""

from .exceptions import NumericalError, ValidationError
from .schemes import SchemeSpec
from .channel import ChannelConfig
from .sim import LinkSystem, Stopping, analytic_ber, estimate_capacity, simulate_ber

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig", "LinkSystem", "NumericalError", "SchemeSpec", "Stopping",
    "ValidationError", "analytic_ber", "estimate_capacity", "simulate_ber",
]
