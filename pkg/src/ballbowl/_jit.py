"""Numba shim: fall back to plain Python when numba is unavailable."""

try:
    from numba import njit
except Exception:  # pragma: no cover - exercised only without numba installed
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco
