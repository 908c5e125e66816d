from os import environ

# By default we disable `numba` caching as it causes problems for parallel execution.
NUMBA_CACHE_ENABLE = environ.get("RJIP_NUMBA_CACHE", "").lower() in {"1", "true", "yes"}

# Value assigned to pixels that no known pixel reaches.
FALLBACK_VALUE = 128.0

# Gaussian support is cut at TRUNCATION_FACTOR·σ.
TRUNCATION_FACTOR = 4.0

# σ is rounded to this many decimals before the weights are built.
SIGMA_DECIMALS = 6
