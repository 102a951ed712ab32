"""Pick the compiled kernels when available, else the pure-Python twin.

Set ``CALIBLOSS_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py as python_kernels

compiled_kernels = None
if os.environ.get("CALIBLOSS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"

bell_number = kernels.bell_number
partition_labels = kernels.partition_labels
coarsen_all = kernels.coarsen_all
