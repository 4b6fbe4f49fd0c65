"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericalFault -> 3, ResourceCapError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration or violated operation precondition."""


class PaddingError(ConfigError):
    """Support / light-cone padding contract violated."""


class ResolutionExhausted(ConfigError):
    """Dyadic sample too coarse for the requested scale search."""


class NumericalFault(RuntimeError):
    """Solver non-convergence or NaN detected during evolution."""


class ResourceCapError(RuntimeError):
    """Requested object exceeds the configured resource bounds."""
