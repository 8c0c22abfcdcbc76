"""Joint support recovery from few Gaussian linear measurements.

Submodules: ``model`` (configuration and instance generation),
``estimator`` (the closed-form decision rules), ``bounds`` (analytic tail
and moment evaluators), ``montecarlo`` (the parallel experiment engine)
and ``cli`` (the ``supprec`` command). ``kernels`` holds the compiled or
NumPy statistic backends.
"""

from .bounds import BoundConstants
from .model import (
    ConfigError,
    ProblemConfig,
    ProblemInstance,
    SignalMode,
    Stream,
    SupportMode,
    generate_instance,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConstants",
    "ConfigError",
    "ProblemConfig",
    "ProblemInstance",
    "SignalMode",
    "Stream",
    "SupportMode",
    "generate_instance",
    "__version__",
]
