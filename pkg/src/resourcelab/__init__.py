"""Resource-theory toolkit: free-state measures, hypothesis tests and conversion protocols."""

from .config import DEFAULT, PROFILES, Tolerances
from .freesets import FlaggedIsotropicFreeSet, IncoherentFreeSet, dmax_to_freeset, relent_to_freeset

__version__ = "0.1.0"

__all__ = ["DEFAULT", "PROFILES", "Tolerances", "IncoherentFreeSet", "FlaggedIsotropicFreeSet",
           "dmax_to_freeset", "relent_to_freeset", "__version__"]
