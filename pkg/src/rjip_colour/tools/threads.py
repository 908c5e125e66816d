from os import cpu_count, environ

from ..core.exception import ContractError

# Variables of the implicit numpy/BLAS thread pools
environment_variables = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def disable_implicit_numpy_multithreading(num_threads: str = "1") -> None:
    """Force single threaded numpy in worker processes.

    Must be done before numpy is loaded. Overrides variables only if they are not set.
    """
    for var_name in environment_variables:
        if var_name in environ:
            continue

        environ[var_name] = num_threads


def worker_count(requested: int | None = None) -> int:
    """Number of sweep workers: `requested`, capped by `RJIP_THREADS` and the CPU count."""
    limit = cpu_count() or 1
    if value := environ.get("RJIP_THREADS"):
        try:
            cap = int(value)
        except ValueError as exc:
            raise ContractError(f"RJIP_THREADS must be an integer, got {value!r}") from exc
        if cap < 1:
            raise ContractError(f"RJIP_THREADS must be positive, got {cap}")
        limit = min(limit, cap)
    if requested is None:
        return limit
    if requested < 1:
        raise ContractError(f"Worker count must be positive, got {requested}")
    return min(requested, limit)
