"""Hot numeric kernels: numba-jitted by default, pure numpy on request.

Set SYNTHTRIALS_NO_NUMBA=1 before import to force the numpy path; the same
flag drives the benchmark in benchmarks/kernel_bench.py. Both paths share
the same contracts (see each *_np module for the reference semantics).
"""

import os

_FORCE_NUMPY = os.environ.get("SYNTHTRIALS_NO_NUMBA", "").lower() in ("1", "true", "yes")

if _FORCE_NUMPY:
    BACKEND = "numpy"
else:
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"

if BACKEND == "numba":
    from .boosting_nb import build_tree, tree_apply
    from .kmeans_nb import lloyd
else:
    from .boosting_np import build_tree, tree_apply
    from .kmeans_np import lloyd

__all__ = ["BACKEND", "build_tree", "tree_apply", "lloyd"]
