"""Neural surrogate for methane steam reforming across kinetic and equilibrium regimes."""

from msr_surrogate.state import Conversions, GasComposition, OperatingPoint

__version__ = "0.1.0"

__all__ = ["Conversions", "GasComposition", "OperatingPoint", "__version__"]
