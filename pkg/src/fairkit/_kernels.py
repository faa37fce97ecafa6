"""Kernel dispatch: the compiled extension when built, numpy otherwise.

Set ``FAIRKIT_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _fallback

BACKEND = "python"
find_best_splits = _fallback.find_best_splits

if os.environ.get("FAIRKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:
        pass
    else:
        find_best_splits = _core.find_best_splits
        BACKEND = "compiled"
