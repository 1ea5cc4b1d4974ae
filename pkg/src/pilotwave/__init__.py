"""pilotwave: classical, Bohmian and semiclassical trajectory laboratory.

Integrates the diamagnetic Kepler problem and solvable reference systems,
evaluates exact superposition wavefields and their guidance-law
trajectories, and provides the stationary-phase toolchain (van Vleck
propagator, semiclassical Green function, trace-formula level densities,
recurrence spectra) that ties the two together.
"""

__version__ = "0.1.0"

from . import bohmian, classical, ensembles, orbits, quantum, semiclassical, spectra, systems
from .errors import (
    ConfigError,
    DomainError,
    IntegrationError,
    NodeSingularityError,
    PilotwaveError,
    TurningPointError,
)

__all__ = [
    "__version__",
    "systems",
    "quantum",
    "bohmian",
    "ensembles",
    "classical",
    "orbits",
    "semiclassical",
    "spectra",
    "PilotwaveError",
    "DomainError",
    "NodeSingularityError",
    "IntegrationError",
    "TurningPointError",
    "ConfigError",
]
