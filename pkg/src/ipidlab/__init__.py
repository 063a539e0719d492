"""ipidlab: IPv4 ID selection methods, their analysis, and benchmarks.

The package implements the seven IPID selection methods found across
major operating systems (``ipidlab.selectors``), evaluates their
collision and adversarial-guess probabilities under Poisson traffic
(``ipidlab.analytics``, ``ipidlab.montecarlo``), benchmarks their
multi-worker contention behavior over packet traces (``ipidlab.bench``,
``ipidlab.trace``), and recommends a configuration from estimated
traffic rates (``ipidlab.recommend``). The ``ipidlab`` command exposes
all of it; see ``ipidlab --help``.
"""

from .constants import IPID_MASK, IPID_SPACE
from .selectors import (
    METHODS,
    ConfigError,
    ConnectionState,
    FlowKey,
    SelectorConfig,
    bucket_index,
    new_selector,
)

__version__ = "0.1.0"

__all__ = [
    "IPID_MASK",
    "IPID_SPACE",
    "METHODS",
    "ConfigError",
    "ConnectionState",
    "FlowKey",
    "SelectorConfig",
    "bucket_index",
    "new_selector",
    "__version__",
]
