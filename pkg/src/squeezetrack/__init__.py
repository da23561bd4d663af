"""Squeezed-light particle tracking: simulation, detection chain and microrheology."""

from squeezetrack.errors import ConfigError, DegenerateInputError, DomainError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DegenerateInputError", "DomainError", "__version__"]
