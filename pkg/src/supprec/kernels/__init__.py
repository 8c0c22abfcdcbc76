"""Hot statistic kernels with a compiled core and a NumPy fallback.

The compiled Cython extension is preferred when it was built; otherwise the
pure-NumPy implementations are used. Both backends compute the same
quantities and agree to floating-point reduction-order differences (around
1e-13 relative); each backend on its own is deterministic for a given build.
Run ``benchmarks/bench_kernels.py`` to compare their speed.
"""

try:
    from . import _compiled as _impl

    BACKEND = "compiled"
except ImportError:
    from . import _python as _impl

    BACKEND = "python"

proxy_correlations = _impl.proxy_correlations
support_statistic = _impl.support_statistic
column_sq_norms = _impl.column_sq_norms

__all__ = ["BACKEND", "proxy_correlations", "support_statistic", "column_sq_norms"]
